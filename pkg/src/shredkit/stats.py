"""KL divergence, Kruskal-Wallis with chi-square p-values, and descriptives."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import BothEmpty, DegenerateInput, EmptyInput
from .musicology import Distribution

DEFAULT_EPSILON = 1e-6


def smoothed_pair(p: Distribution, q: Distribution, epsilon: float = DEFAULT_EPSILON):
    """Align two distributions on their union support and add ``epsilon``.

    Returns ``(labels, p_probs, q_probs)``.
    """
    labels = list(p.labels)
    seen = set(labels)
    labels.extend(label for label in q.labels if label not in seen)
    pc = np.array([p.get(label) for label in labels]) + epsilon
    qc = np.array([q.get(label) for label in labels]) + epsilon
    return labels, pc / pc.sum(), qc / qc.sum()


def kld(p: Distribution, q: Distribution, epsilon: float = DEFAULT_EPSILON) -> float:
    """KL(p || q) in bits with additive smoothing over the union support."""
    if p.total <= 0 and q.total <= 0:
        raise BothEmpty("both distributions are empty")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    _, pp, qq = smoothed_pair(p, q, epsilon)
    mask = pp > 0
    if np.any(qq[mask] == 0):
        return math.inf
    value = float(np.sum(pp[mask] * np.log2(pp[mask] / qq[mask])))
    return max(value, 0.0)


# ------------------------------------------------------------- chi-square tail

_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 100_000
_TINY = 1e-300


def _lower_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_fraction(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_series(a, x)))
    return min(1.0, max(0.0, _upper_fraction(a, x)))


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    return gamma_q(df / 2.0, x / 2.0)


# ------------------------------------------------------------- Kruskal-Wallis


@dataclass(frozen=True)
class KWResult:
    H: float
    df: int
    p: float
    tie_correction: float
    n: int

    def to_json(self) -> dict:
        d = asdict(self)
        return {
            "statistic": d["H"],
            "df": d["df"],
            "p": d["p"],
            "tie_correction": d["tie_correction"],
            "n": d["n"],
        }


def kruskal_wallis(groups) -> KWResult:
    """Kruskal-Wallis H test with midranks and the standard tie correction."""
    groups = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(groups) < 2:
        raise DegenerateInput("need at least 2 groups")
    if any(g.size == 0 for g in groups):
        raise DegenerateInput("empty group")
    pooled = np.concatenate(groups)
    n = pooled.size
    if n < 3:
        raise DegenerateInput("need at least 3 observations")
    ranks, tie_term = kernels.midranks(pooled)
    tie_correction = 1.0 - tie_term / (n ** 3 - n)
    if tie_correction <= 0:
        raise DegenerateInput("all values identical")
    sizes = np.array([g.size for g in groups], dtype=np.float64)
    bounds = np.cumsum(sizes).astype(int)
    rank_sums = np.array([seg.sum() for seg in np.split(ranks, bounds[:-1])])
    h = 12.0 / (n * (n + 1)) * float(np.sum(rank_sums ** 2 / sizes)) - 3.0 * (n + 1)
    h = max(h / tie_correction, 0.0)
    df = len(groups) - 1
    return KWResult(h, df, chi_square_sf(h, df), tie_correction, int(n))


# ----------------------------------------------------------------- descriptive


def descriptive(values) -> dict:
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("no values")
    return {
        "n": int(x.size),
        "mean": float(x.mean()),
        "median": float(np.median(x)),
        "min": float(x.min()),
        "max": float(x.max()),
        "std": float(x.std()),
    }
