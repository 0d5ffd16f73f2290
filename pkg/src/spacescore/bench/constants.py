"""Canonical benchmark constants and regression values."""

import math

import numpy as np

BRANIN_BOUNDS = ((-5.0, 10.0), (0.0, 15.0))
BRANIN_MINIMUM = 10.0 / (8.0 * math.pi)  # 0.397887...
BRANIN_MINIMIZERS = ((-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475))
# Direct evaluation at the origin: 36 + 10 * (1 - 1 / (8 pi)) + 10.
BRANIN_AT_ORIGIN = 55.602112642270262

HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)
HARTMANN6_MINIMIZER = (0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573)
HARTMANN6_MINIMUM = -3.32237
# Direct evaluation at the origin, pinned as a regression value.
HARTMANN6_AT_ORIGIN = -0.00508911288366444
