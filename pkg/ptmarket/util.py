import lab as B
import numpy as np
import pandas as pd
from plum import Dispatcher

__all__ = [
    "ValidationError",
    "make_rng",
    "moving_average",
    "check_range",
    "package_version",
]

_dispatch = Dispatcher()


class ValidationError(ValueError):
    """An input violates a documented invariant."""


@_dispatch
def make_rng(seed: int, *stream: int):
    """Construct a random number generator for a named stream of a seed.

    Different streams of the same seed are statistically independent, and the same
    `(seed, *stream)` always gives the same generator.

    Args:
        seed (int): Master seed.
        *stream (int): Stream identifiers.

    Returns:
        :class:`numpy.random.Generator`: Generator.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


@_dispatch
def make_rng(rng: np.random.Generator):
    return rng


@_dispatch
def make_rng(seed: None):
    raise ValidationError("A seed is required for reproducible runs.")


def moving_average(x, window=10):
    """Trailing moving average with partial windows at the start.

    Args:
        x (vector): Values.
        window (int, optional): Window length. Defaults to `10`.

    Returns:
        vector: Moving average of the same length as `x`.
    """
    if window < 1:
        raise ValueError(f"Window must be at least one, but got {window}.")
    series = pd.Series(B.to_numpy(x), dtype=float)
    return series.rolling(window=window, min_periods=1).mean().to_numpy()


def check_range(name, bounds, lower=-np.inf, upper=np.inf):
    """Check that a range is ordered and lies within bounds.

    Args:
        name (str): Name of the range for error messages.
        bounds (tuple): Lower and upper end.
        lower (scalar, optional): Smallest allowed value.
        upper (scalar, optional): Largest allowed value.

    Returns:
        tuple[float, float]: The range as floats.
    """
    if len(bounds) != 2:
        raise ValidationError(f'Range "{name}" must have two elements, got {bounds}.')
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo <= hi:
        raise ValidationError(f'Range "{name}" is not ordered: {lo} > {hi}.')
    if lo < lower or hi > upper:
        raise ValidationError(
            f'Range "{name}" = [{lo}, {hi}] must lie within [{lower}, {upper}].'
        )
    return lo, hi


def package_version():
    """Version of the package.

    Returns:
        str: Version, or `"unknown"` if the package is not installed.
    """
    try:
        from ._version import version
    except ImportError:
        return "unknown"
    return version
