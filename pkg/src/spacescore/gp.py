"""Gaussian-process surrogate with an ARD Matern-5/2 kernel.

Inputs live in the base space's unit cube and targets are standardized, so the
prior mean is zero. Hyperparameters are optimized in an unconstrained space
``u`` with ``positive = softplus(u)``; the layout of ``u`` is
``[amplitude, inv_lengthscale_1..d, noise_var]``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg, optimize

from spacescore.core import Dataset, SearchSpace, _unit, make_rng, to_unit_cube
from spacescore.errors import (
    DegenerateCovarianceError,
    DegenerateTargetsWarning,
    IllConditionedKernelError,
    InsufficientDataError,
    NumericalError,
)

SQRT5 = math.sqrt(5.0)
LOG_2PI = math.log(2.0 * math.pi)

JITTER_START = 1e-10
JITTER_MAX = 1e-6


def softplus(u):
    return np.logaddexp(0.0, u)


def softplus_inverse(v):
    v = np.asarray(v, dtype=float)
    return v + np.log(-np.expm1(-v))


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


@dataclass(frozen=True)
class KernelParams:
    amplitude: float
    inv_lengthscales: np.ndarray
    noise_var: float

    def __post_init__(self):
        ls = np.array(self.inv_lengthscales, dtype=float).reshape(-1)
        ls.setflags(write=False)
        object.__setattr__(self, "inv_lengthscales", ls)
        vals = np.concatenate([[self.amplitude, self.noise_var], ls])
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError(f"kernel parameters must be positive and finite: {self}")

    @property
    def d(self) -> int:
        return len(self.inv_lengthscales)

    @property
    def signal_var(self) -> float:
        return self.amplitude**2

    def to_unconstrained(self) -> np.ndarray:
        return softplus_inverse(
            np.concatenate([[self.amplitude], self.inv_lengthscales, [self.noise_var]])
        )

    @classmethod
    def from_unconstrained(cls, u) -> KernelParams:
        p = softplus(np.asarray(u, dtype=float))
        return cls(float(p[0]), p[1:-1], float(p[-1]))

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "inv_lengthscales": self.inv_lengthscales.tolist(),
            "noise_var": self.noise_var,
        }


def _scaled_distance(params: KernelParams, a, b):
    diff = (a[..., :, None, :] - b[..., None, :, :]) * params.inv_lengthscales
    return diff, np.sqrt(np.sum(diff * diff, axis=-1))


def kernel_matrix(params: KernelParams, a, b) -> np.ndarray:
    """Matern-5/2 cross-covariance between the rows of ``a`` and ``b``.

    Leading batch dimensions broadcast, e.g. ``a`` of shape ``(B, m, d)``
    against ``b`` of shape ``(n, d)`` gives ``(B, m, n)``.
    """
    a = np.asarray(a, float) * params.inv_lengthscales
    b = np.asarray(b, float) * params.inv_lengthscales
    # |a - b|^2 via the inner-product expansion: avoids the (..., m, n, d)
    # difference tensor, which dominates the cost of batched scoring.
    sq = a @ np.swapaxes(b, -1, -2)
    sq *= -2.0
    sq += np.sum(a * a, axis=-1)[..., :, None]
    sq += np.sum(b * b, axis=-1)[..., None, :]
    np.maximum(sq, 0.0, out=sq)
    s = np.sqrt(sq, out=sq)
    s *= SQRT5
    k = np.exp(-s)
    poly = s * s
    poly /= 3.0
    poly += s
    poly += 1.0
    k *= poly
    k *= params.signal_var
    return k


def kernel_eval(params: KernelParams, a, b) -> float:
    return float(kernel_matrix(params, np.atleast_2d(a), np.atleast_2d(b))[0, 0])


def jittered_cholesky(matrix, scale=1.0, start=JITTER_START, error=IllConditionedKernelError):
    """Lower Cholesky factor of ``matrix + jitter * I``.

    Jitter starts at ``start * scale`` and grows tenfold up to ``JITTER_MAX * scale``.
    Returns ``(L, jitter)``.
    """
    eye = np.eye(matrix.shape[-1])
    jitter = start * scale
    while True:
        try:
            return np.linalg.cholesky(matrix + jitter * eye), jitter
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX * scale * (1 - 1e-12):
                raise error(
                    f"Cholesky failed with jitter up to {JITTER_MAX * scale:.1e}"
                ) from None
            jitter = min(jitter * 10.0, JITTER_MAX * scale)


NoisePrior = Literal["positive", "unconstrained"]


def log_prior(params: KernelParams, noise_prior: NoisePrior = "positive"):
    """Log hyperprior and its gradient with respect to the unconstrained vector.

    LogNormal(0, 1) on the amplitude and each inverse lengthscale, and a
    zero-mean Normal with variance 0.1 on the noise term: on the positive noise
    variance by default, or on its unconstrained pre-softplus value.
    """
    u = params.to_unconstrained()
    pos = np.concatenate([[params.amplitude], params.inv_lengthscales])
    logs = np.log(pos)
    value = float(np.sum(-logs - 0.5 * logs**2 - 0.5 * LOG_2PI))
    grad = np.empty_like(u)
    grad[:-1] = (-1.0 - logs) / pos * _sigmoid(u[:-1])
    if noise_prior == "positive":
        v = params.noise_var
        value += -0.5 * v * v / 0.1 - 0.5 * math.log(2 * math.pi * 0.1)
        grad[-1] = -v / 0.1 * _sigmoid(u[-1])
    elif noise_prior == "unconstrained":
        value += -0.5 * u[-1] ** 2 / 0.1 - 0.5 * math.log(2 * math.pi * 0.1)
        grad[-1] = -u[-1] / 0.1
    else:
        raise ValueError(f"unknown noise prior {noise_prior!r}")
    return value, grad


def log_marginal_likelihood(
    params: KernelParams,
    x,
    y,
    *,
    with_prior: bool = True,
    noise_prior: NoisePrior = "positive",
    jitter: float = JITTER_START,
):
    """Log marginal likelihood (plus log hyperprior) and its gradient.

    ``x`` is ``(n, d)`` in the unit cube and ``y`` the standardized targets.
    The gradient is taken with respect to the unconstrained parameters.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    diff, r = _scaled_distance(params, x, x)
    s = SQRT5 * r
    e = np.exp(-s)
    K = params.signal_var * (1.0 + s + s * s / 3.0) * e
    A = K + params.noise_var * np.eye(n)
    L, _ = jittered_cholesky(A, scale=params.signal_var, start=jitter)
    alpha = linalg.cho_solve((L, True), y)
    value = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * LOG_2PI

    A_inv = linalg.cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - A_inv
    grad_pos = np.empty(params.d + 2)
    grad_pos[0] = 0.5 * np.sum(W * K) * 2.0 / params.amplitude
    # dK/dw_i = -(5/3) a^2 (1 + sqrt5 r) exp(-sqrt5 r) * w_i * delta_i^2
    radial = -(5.0 / 3.0) * params.signal_var * (1.0 + s) * e
    # diff already holds w_i * delta_i, so w_i * delta_i^2 = diff_i^2 / w_i
    dK = radial[..., None] * diff * diff / params.inv_lengthscales
    grad_pos[1:-1] = 0.5 * np.einsum("ij,ijk->k", W, dK)
    grad_pos[-1] = 0.5 * np.trace(W)
    grad = grad_pos * _sigmoid(params.to_unconstrained())

    if with_prior:
        pv, pg = log_prior(params, noise_prior)
        value += pv
        grad = grad + pg
    return value, grad


@dataclass(frozen=True)
class FitConfig:
    """Settings for hyperparameter fitting.

    L-BFGS-B keeps ``memory`` curvature pairs; ``noise_floor`` bounds the noise
    variance from below (standardized units) to keep the Gram matrix factorizable.
    Besides the fixed initial point, ``n_restarts`` extra starts are drawn from
    the hyperprior; the best optimum over all runs wins.
    """

    max_iter: int = 3000
    gtol: float = 1e-8
    memory: int = 10
    init_amplitude: float = 1.0
    init_inv_lengthscale: float = 1.0
    init_noise_var: float = 0.01
    noise_floor: float = 1e-6
    noise_prior: NoisePrior = "positive"
    n_restarts: int = 4


@dataclass(frozen=True)
class GpModel:
    space: SearchSpace
    params: KernelParams
    train_x: np.ndarray
    train_y: np.ndarray
    y_mean: float
    y_std: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0
    degenerate_targets: bool = False
    fit_info: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.train_y)

    def standardize(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def destandardize(self, z):
        return np.asarray(z, dtype=float) * self.y_std + self.y_mean

    def unit(self, x) -> np.ndarray:
        """Natural-unit points to this model's input coordinates (no bounds check)."""
        return _unit(self.space, x)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "space": self.space.to_dict(),
            "train_x": self.train_x.tolist(),
            "train_y_standardized": self.train_y.tolist(),
        }

    def dump(self, path) -> None:
        with open(path, "w") as handle:
            json.dump(self.to_dict(), handle, indent=2)


def _standardize(y):
    with np.errstate(over="ignore", invalid="ignore"):
        y_mean = float(np.mean(y))
        y_std = float(np.std(y))
    if not (math.isfinite(y_mean) and math.isfinite(y_std)):
        raise NumericalError("targets are too large to standardize in double precision")
    degenerate = not y_std > 0
    if degenerate:
        warnings.warn("all targets equal; using unit output scale", DegenerateTargetsWarning)
        y_std = 1.0
    return (y - y_mean) / y_std, y_mean, y_std, degenerate


def condition(
    data: Dataset,
    params: KernelParams,
    *,
    y_mean: float | None = None,
    y_std: float | None = None,
) -> GpModel:
    """Model conditioned on ``data`` at fixed hyperparameters.

    Standardization constants default to the data's mean and standard deviation.
    """
    if len(data) < 1:
        raise InsufficientDataError("need at least one observation")
    x = to_unit_cube(data.space, data.x)
    degenerate = False
    if y_mean is None or y_std is None:
        _, m, s, degenerate = _standardize(data.y)
        y_mean = m if y_mean is None else y_mean
        y_std = s if y_std is None else y_std
    y = (data.y - y_mean) / y_std
    A = kernel_matrix(params, x, x) + params.noise_var * np.eye(len(y))
    L, jitter = jittered_cholesky(A, scale=params.signal_var)
    alpha = linalg.cho_solve((L, True), y)
    for arr in (x, y, L, alpha):
        arr.setflags(write=False)
    return GpModel(
        space=data.space,
        params=params,
        train_x=x,
        train_y=y,
        y_mean=float(y_mean),
        y_std=float(y_std),
        chol=L,
        alpha=alpha,
        jitter=jitter,
        degenerate_targets=degenerate,
    )


def _restart_points(d: int, n: int, seed: int, config: FitConfig) -> list[np.ndarray]:
    rng = make_rng(seed, 0x6770)
    starts = []
    for _ in range(n):
        amp = float(np.exp(rng.standard_normal()))
        inv_ls = np.exp(rng.standard_normal(d))
        noise = max(float(np.exp(rng.uniform(np.log(1e-4), np.log(0.1)))), config.noise_floor)
        starts.append(KernelParams(amp, inv_ls, noise).to_unconstrained())
    return starts


def fit(data: Dataset, seed: int = 0, config: FitConfig = FitConfig()) -> GpModel:
    """Maximize the log posterior of the hyperparameters and condition on ``data``.

    The first L-BFGS run starts at amplitude 1, inverse lengthscales 1 and
    noise variance 0.01; the remaining starts come from ``seed``.
    """
    if len(data) < 2:
        raise InsufficientDataError(f"need at least 2 observations to fit, got {len(data)}")
    x = to_unit_cube(data.space, data.x)
    y, y_mean, y_std, degenerate = _standardize(data.y)
    d = data.space.d

    init = KernelParams(
        config.init_amplitude,
        np.full(d, config.init_inv_lengthscale),
        max(config.init_noise_var, config.noise_floor),
    )
    starts = [init.to_unconstrained()] + _restart_points(d, config.n_restarts, seed, config)
    bounds = (
        [(-12.0, 12.0)]
        + [(-12.0, 200.0)] * d
        + [(float(softplus_inverse(config.noise_floor)), 12.0)]
    )
    lo, hi = np.array(bounds).T
    best = {"f": math.inf, "u": starts[0], "evals": 0}

    def objective(u):
        best["evals"] += 1
        try:
            val, grad = log_marginal_likelihood(
                KernelParams.from_unconstrained(u), x, y, noise_prior=config.noise_prior
            )
        except IllConditionedKernelError:
            return 1e25, np.zeros_like(u)
        f = -val
        if f < best["f"]:
            best["f"], best["u"] = f, np.array(u)
        return f, -grad

    iterations = []
    for u0 in starts:
        result = optimize.minimize(
            objective,
            np.clip(u0, lo, hi),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": config.max_iter,
                "maxcor": config.memory,
                "gtol": config.gtol,
                "ftol": 1e-15,
                "maxfun": 4 * config.max_iter,
            },
        )
        iterations.append(int(result.nit))
    params = KernelParams.from_unconstrained(best["u"])
    model = condition(data, params, y_mean=y_mean, y_std=y_std)
    object.__setattr__(model, "degenerate_targets", degenerate)
    model.fit_info.update(
        neg_log_posterior=best["f"], iterations=iterations, evaluations=best["evals"]
    )
    return model


@dataclass(frozen=True)
class JointPosterior:
    """Posterior over latent values at ``m`` query points, standardized units."""

    mean: np.ndarray
    cov: np.ndarray
    jitter_scale: float = 1.0


def batched_posterior(model: GpModel, u, add_noise: bool = False):
    """Mean ``(..., m)`` and covariance ``(..., m, m)`` at unit-cube points ``u``.

    ``add_noise`` adds the observation-noise variance to the diagonal, giving
    the predictive distribution of noisy ``y`` rather than latent ``f``.
    """
    u = np.asarray(u, dtype=float)
    k_star = kernel_matrix(model.params, u, model.train_x)
    mean = k_star @ model.alpha
    lead = k_star.shape[:-1]
    v = linalg.solve_triangular(
        model.chol, k_star.reshape(-1, model.n).T, lower=True, check_finite=False
    )
    v = v.T.reshape(*lead, model.n)
    cov = kernel_matrix(model.params, u, u) - v @ np.swapaxes(v, -1, -2)
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    if add_noise:
        cov = cov + model.params.noise_var * np.eye(cov.shape[-1])
    return mean, cov


def joint_posterior(model: GpModel, batch, add_noise: bool = False) -> JointPosterior:
    """Joint posterior at ``m`` unit-cube points (rows of ``batch``)."""
    mean, cov = batched_posterior(model, np.atleast_2d(batch), add_noise=add_noise)
    return JointPosterior(mean, cov, jitter_scale=model.params.signal_var)


def sample_posterior(post: JointPosterior, n_samples: int, seed: int) -> np.ndarray:
    """``(n_samples, m)`` joint draws ``mean + L z``.

    Draws are generated point-major, so the first ``k`` columns do not depend
    on how many further points the posterior covers.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    L, _ = jittered_cholesky(post.cov, scale=post.jitter_scale, error=DegenerateCovarianceError)
    z = make_rng(seed).standard_normal((len(post.mean), n_samples))
    return (post.mean[:, None] + L @ z).T
