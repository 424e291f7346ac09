"""Numerical-feature codec.

Every continuous field is encoded into a (discrete id, scale) pair:
field embedding keeps the raw value as the scale under a constant id,
while equal-distance and logarithm discretization bucket the value and
fix the scale at 1.0. Ranges are fit on the training split only.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    EmptyColumn,
    NaNValue,
    NonPositiveAfterShift,
)


class Method(enum.Enum):
    FIELD_EMBEDDING = "field_embedding"
    EQUAL_DISTANCE = "equal_distance"
    LOGARITHM = "logarithm"


@dataclass(frozen=True)
class DiscretizerSpec:
    method: Method
    x_min: float = math.nan
    x_max: float = math.nan
    buckets: int = 0
    shift: float = 0.0

    def __post_init__(self):
        if self.method is Method.EQUAL_DISTANCE:
            if not self.x_max > self.x_min:
                raise DataError(
                    "equal-distance discretization needs x_max > x_min "
                    f"(got [{self.x_min}, {self.x_max}])"
                )
            if self.buckets < 1:
                raise DataError("bucket count must be >= 1")


@dataclass(frozen=True)
class FeatureTuple:
    discrete: int
    scale: float


def fit_range(values) -> tuple[float, float]:
    """Observed (min, max) of a float column; NaN anywhere is an error."""
    values = np.asarray(values, np.float64)
    if values.size == 0:
        raise EmptyColumn("cannot fit a range on an empty column")
    nan_rows = np.flatnonzero(np.isnan(values))
    if nan_rows.size:
        raise NaNValue(f"NaN at row {int(nan_rows[0])}")
    return float(values.min()), float(values.max())


def fit_discretizer(values, method: Method, buckets: int = 0,
                    ) -> DiscretizerSpec:
    """Fit a spec on (training-split) values, including the log shift."""
    x_min, x_max = fit_range(values)
    if method is Method.LOGARITHM:
        shift = 1.0 - x_min if x_min <= 0.0 else 0.0
        if x_min + shift <= 0.0:
            raise NonPositiveAfterShift(
                f"column minimum {x_min} is not positive even after "
                f"shifting by {shift}"
            )
        return DiscretizerSpec(method, x_min, x_max, 0, shift)
    if method is Method.EQUAL_DISTANCE:
        return DiscretizerSpec(method, x_min, x_max, buckets)
    return DiscretizerSpec(method, x_min, x_max)


def equal_distance(x: float, spec: DiscretizerSpec) -> FeatureTuple:
    """Bucket x into one of spec.buckets equal-width bins.

    x is clamped into [x_min, x_max] first, and the bucket id into
    [0, buckets-1] so x == x_max lands in the top bucket rather than
    one past it.
    """
    if spec.method is not Method.EQUAL_DISTANCE:
        raise DataError("spec method mismatch")
    if math.isnan(x):
        raise NaNValue("cannot bucket NaN")
    x = min(max(x, spec.x_min), spec.x_max)
    b = math.floor((x - spec.x_min) / (spec.x_max - spec.x_min)
                   * spec.buckets)
    b = min(max(b, 0), spec.buckets - 1)
    return FeatureTuple(int(b), 1.0)


def logarithm(x: float) -> FeatureTuple:
    """floor(ln(x)^2) bucketing; caller applies any shift beforehand."""
    if not math.isfinite(x):
        raise NaNValue(f"cannot bucket {x}")
    if x <= 0.0:
        raise NonPositiveAfterShift(f"logarithm needs x > 0, got {x}")
    return FeatureTuple(int(math.floor(math.log(x) ** 2)), 1.0)


def field_embedding(x: float) -> FeatureTuple:
    if not math.isfinite(x):
        raise NaNValue(f"field embedding needs a finite value, got {x}")
    return FeatureTuple(1, float(x))


def encode_column(spec: DiscretizerSpec, values
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized encode of a whole column under a fitted spec."""
    values = np.asarray(values, np.float64)
    n = values.shape[0]
    if spec.method is Method.FIELD_EMBEDDING:
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NaNValue(f"non-finite value at row {int(bad[0])}")
        return np.ones(n, np.int64), values.astype(np.float64)
    if spec.method is Method.EQUAL_DISTANCE:
        bad = np.flatnonzero(np.isnan(values))
        if bad.size:
            raise NaNValue(f"NaN at row {int(bad[0])}")
        x = np.clip(values, spec.x_min, spec.x_max)
        b = np.floor((x - spec.x_min) / (spec.x_max - spec.x_min)
                     * spec.buckets)
        b = np.clip(b, 0, spec.buckets - 1).astype(np.int64)
        return b, np.ones(n, np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NaNValue(f"non-finite value at row {int(bad[0])}")
    shifted = values + spec.shift
    if np.any(shifted <= 0.0):
        bad = int(np.flatnonzero(shifted <= 0.0)[0])
        raise NonPositiveAfterShift(
            f"value at row {bad} is not positive after shift {spec.shift}"
        )
    b = np.floor(np.log(shifted) ** 2).astype(np.int64)
    return b, np.ones(n, np.float64)


def spec_to_text(field: str, spec: DiscretizerSpec) -> str:
    """One-line serialization used in run manifests."""
    parts = [f"field={field}", f"method={spec.method.value}"]
    if spec.method is not Method.FIELD_EMBEDDING:
        parts.append(f"x_min={spec.x_min!r}")
        parts.append(f"x_max={spec.x_max!r}")
    if spec.method is Method.EQUAL_DISTANCE:
        parts.append(f"buckets={spec.buckets}")
    if spec.method is Method.LOGARITHM:
        parts.append(f"shift={spec.shift!r}")
    return " ".join(parts)
