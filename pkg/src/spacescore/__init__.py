"""Budget-conditional scores for hyperrectangular search spaces."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("spacescore")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
