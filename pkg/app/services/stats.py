"""
Distribution-free statistics for the relative scenario risk.

The p-quantile relative scenario risk of a perceived-scene cost A and a
plausible-scene cost B is

    R(p) = Pr(B > theta | A <= theta),  theta = Phi_A^{-1}(p)
         = 1 - C(p, Phi_B(Phi_A^{-1}(p))) / p

for the copula C coupling A and B. Nothing is assumed about C beyond the
Frechet-Hoeffding envelope, and the two marginal CDFs are replaced by empirical
CDFs widened by the DKW half-width, which gives bounds holding with
probability at least 1 - alpha.

Choose p with n * p >= 1: for smaller p the conditioning event may have no
empirical mass and the bounds degenerate to [0, 1].
"""
import math
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from app.core.errors import EmptySampleError, ParameterError
from app.schemas.config import DetectorParams
from app.schemas.results import RiskBounds

ArrayLike = Union[Sequence[float], np.ndarray]


class Ecdf:
    """Empirical CDF over a sorted copy of the samples (ties kept)"""

    __slots__ = ("samples", "n")

    def __init__(self, sorted_samples: np.ndarray):
        self.samples = sorted_samples
        self.samples.setflags(write=False)
        self.n = int(len(sorted_samples))

    def __repr__(self) -> str:
        return f"Ecdf(n={self.n}, min={self.samples[0]:.4g}, max={self.samples[-1]:.4g})"

    def evaluate(self, x):
        """Fraction of samples <= x; accepts scalars or arrays, and +/-inf"""
        counts = np.searchsorted(self.samples, x, side="right")
        if np.ndim(counts) == 0:
            return int(counts) / self.n
        return counts / self.n

    def quantile(self, q: float) -> float:
        """Generalized inverse inf{c : Phi(c) >= q}; -inf for q <= 0, +inf for q > 1"""
        if q <= 0.0:
            return -math.inf
        if q > 1.0:
            return math.inf
        k = min(max(int(math.ceil(q * self.n)), 1), self.n)
        # ceil(q * n) can be off by one under rounding; settle on the smallest k with k/n >= q
        while k > 1 and (k - 1) / self.n >= q:
            k -= 1
        while k < self.n and k / self.n < q:
            k += 1
        return float(self.samples[k - 1])

    @property
    def max(self) -> float:
        return float(self.samples[-1])


def ecdf_build(values: Union[ArrayLike, Iterable[float]]) -> Ecdf:
    """
    Build an empirical CDF from finite samples

    Raises:
        EmptySampleError: no samples
        ParameterError: a sample is NaN or infinite
    """
    data = np.array(list(values) if not isinstance(values, np.ndarray) else values, dtype=float).ravel()
    if data.size == 0:
        raise EmptySampleError()
    if not np.all(np.isfinite(data)):
        raise ParameterError("sample set contains non-finite values")
    return Ecdf(np.sort(data, kind="stable"))


def ecdf_eval(e: Ecdf, x: float) -> float:
    return e.evaluate(x)


def ecdf_quantile(e: Ecdf, q: float) -> float:
    return e.quantile(q)


def _check_probability(name: str, value: float) -> None:
    if not (0.0 < value < 1.0):
        raise ParameterError(f"{name} must lie in (0, 1), got {value}")


def dkw_epsilon(alpha: float, n: int) -> float:
    """Half-width of the uniform DKW band: sqrt(ln(2/alpha) / (2n))"""
    _check_probability("alpha", alpha)
    if int(n) != n or n < 1:
        raise ParameterError(f"sample count must be a positive integer, got {n}")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def frechet_bounds(u: float, v: float) -> Tuple[float, float]:
    """Lower (W) and upper (M) Frechet-Hoeffding copula bounds in two dimensions"""
    for name, value in (("u", u), ("v", v)):
        if not (0.0 <= value <= 1.0):
            raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    return max(u + v - 1.0, 0.0), min(u, v)


def _clamp_unit(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def v_bounds(
    ecdf_a: Ecdf,
    ecdf_b: Ecdf,
    p: float,
    alpha: float,
    clamp_to_support: bool = True,
) -> Tuple[float, float]:
    """
    Confidence bounds on Phi_B(Phi_A^{-1}(p)).

    The quantile of the shifted CDF Phi_A -/+ eps at p is the plain quantile at
    p +/- eps. With clamp_to_support, a level above 1 resolves to the largest
    A sample rather than +inf. The true p-quantile of A can lie above that
    sample, so clamped v_high may undershoot and the bounds are no longer
    guaranteed to be conservative.

    Returns:
        (v_low, v_high), both clamped to [0, 1]
    """
    _check_probability("p", p)
    if ecdf_a.n != ecdf_b.n:
        raise ParameterError(f"sample counts differ: {ecdf_a.n} vs {ecdf_b.n}")
    eps = dkw_epsilon(alpha, ecdf_a.n)

    upper_level = p + eps
    if clamp_to_support and upper_level > 1.0:
        x_high = ecdf_a.max
    else:
        x_high = ecdf_a.quantile(upper_level)
    x_low = ecdf_a.quantile(p - eps)

    v_high = _clamp_unit(ecdf_b.evaluate(x_high) + eps)
    v_low = _clamp_unit(ecdf_b.evaluate(x_low) - eps)
    return v_low, v_high


def bounds_from_ecdfs(
    ecdf_a: Ecdf,
    ecdf_b: Ecdf,
    p: float,
    alpha: float,
    clamp_to_support: bool = True,
) -> RiskBounds:
    v_low, v_high = v_bounds(ecdf_a, ecdf_b, p, alpha, clamp_to_support)
    lower = _clamp_unit(1.0 - min(p, v_high) / p)
    upper = _clamp_unit(1.0 - max(p + v_low - 1.0, 0.0) / p)
    return RiskBounds(
        lower=lower,
        upper=max(lower, upper),
        epsilon=dkw_epsilon(alpha, ecdf_a.n),
        v_low=v_low,
        v_high=v_high,
    )


def rsr_bounds(
    samples_a: ArrayLike,
    samples_b: ArrayLike,
    p: float,
    alpha: float,
    clamp_to_support: bool = True,
) -> RiskBounds:
    """
    PAC bounds on the p-quantile relative scenario risk from n samples per scene

    Raises:
        ParameterError: unequal or too few samples, p or alpha outside (0, 1)
    """
    _check_probability("alpha", alpha)
    if len(samples_a) != len(samples_b):
        raise ParameterError(f"sample counts differ: {len(samples_a)} vs {len(samples_b)}")
    if len(samples_a) < 2:
        raise ParameterError("at least two samples per scene are required")
    return bounds_from_ecdfs(ecdf_build(samples_a), ecdf_build(samples_b), p, alpha, clamp_to_support)


def _check_counts(samples_a: ArrayLike, samples_b: ArrayLike, n: int) -> None:
    if len(samples_a) != n or len(samples_b) != n:
        raise ParameterError(
            f"expected {n} samples per scene, got {len(samples_a)} and {len(samples_b)}"
        )


def _exceeds(v_high: float, p: float, gamma: float) -> bool:
    """lower > gamma, written as min{p, v_high} < p (1 - gamma)"""
    return min(p, v_high) < p * (1.0 - gamma)


def critical(bounds: RiskBounds, params: DetectorParams) -> bool:
    """Detection test on precomputed bounds"""
    return _exceeds(bounds.v_high, params.p, params.gamma)


def detect(samples_a: ArrayLike, samples_b: ArrayLike, params: DetectorParams) -> bool:
    """True when the p-RSR lower bound exceeds gamma, i.e. the scene is critical"""
    _check_counts(samples_a, samples_b, params.n)
    bounds = bounds_from_ecdfs(
        ecdf_build(samples_a), ecdf_build(samples_b), params.p, params.alpha, params.clamp_to_support
    )
    return critical(bounds, params)


def detect_levels(
    samples_a: ArrayLike,
    samples_b: ArrayLike,
    p: float,
    alpha: float,
    gammas: Sequence[float],
    clamp_to_support: bool = True,
) -> List[bool]:
    """Evaluate several risk thresholds against one pair of sample sets"""
    bounds = rsr_bounds(samples_a, samples_b, p, alpha, clamp_to_support)
    flags = []
    for gamma in gammas:
        _check_probability("gamma", gamma)
        flags.append(_exceeds(bounds.v_high, p, gamma))
    return flags
