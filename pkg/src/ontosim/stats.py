"""Reproducible random streams and goodness-of-fit checks.

Every random draw in the package comes from an :class:`RngStream`, a Philox
4x64 counter-based generator keyed by a BLAKE2b digest of ``(seed, label)``.
Equal ``(seed, label)`` pairs give bit-identical sequences on every platform;
distinct labels give independent keys.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st

from .errors import BadEdges, InsufficientExpected


def _key(seed: int, label) -> np.ndarray:
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed).to_bytes(16, "little", signed=True))
    h.update(repr(label).encode())
    return np.frombuffer(h.digest(), dtype="<u8").astype(np.uint64)


class RngStream:
    """Random stream identified by a root seed and a label.

    The label can be any value with a stable ``repr`` (ints, strings, tuples).
    """

    def __init__(self, seed: int, label=0):
        self.seed = int(seed)
        self.label = label
        self.generator = np.random.Generator(np.random.Philox(key=_key(self.seed, label)))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r})"

    def child(self, label) -> "RngStream":
        return RngStream(self.seed, (self.label, label))

    def random(self, size=None):
        return self.generator.random(size)

    def exponential(self, scale=1.0, size=None):
        return self.generator.exponential(scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)


@dataclass
class GofReport:
    statistic: float
    dof: int
    p_value: float
    bin_edges: list | None = None
    test: str = ""
    extra: dict = field(default_factory=dict)

    def passed(self, alpha: float = 0.01) -> bool:
        return self.p_value > alpha

    def to_dict(self) -> dict:
        d = {"test": self.test, "statistic": float(self.statistic), "dof": int(self.dof), "p_value": float(self.p_value)}
        if self.bin_edges is not None:
            d["bin_edges"] = [float(e) for e in self.bin_edges]
        if self.extra:
            d["extra"] = {k: (float(v) if isinstance(v, (np.floating, float, np.integer)) else v) for k, v in self.extra.items()}
        return d


@dataclass
class Histogram:
    counts: np.ndarray
    underflow: int
    overflow: int

    @property
    def in_range(self) -> int:
        return int(self.counts.sum())


def histogram(samples, bin_edges) -> Histogram:
    """Counts on half-open bins ``[e_i, e_{i+1})``; out-of-range samples are tallied separately."""
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise BadEdges("bin edges must be a strictly increasing 1-D sequence of length >= 2")
    x = np.asarray(samples, dtype=float).ravel()
    idx = np.searchsorted(edges, x, side="right") - 1
    nb = edges.size - 1
    under = int(np.count_nonzero(idx < 0))
    over = int(np.count_nonzero(idx >= nb))
    counts = np.bincount(idx[(idx >= 0) & (idx < nb)], minlength=nb)
    return Histogram(counts, under, over)


def _pool(expected, observed, min_expected):
    groups_e, groups_o = [], []
    acc_e = acc_o = 0.0
    for e, o in zip(expected, observed):
        acc_e += e
        acc_o += o
        if acc_e >= min_expected:
            groups_e.append(acc_e)
            groups_o.append(acc_o)
            acc_e = acc_o = 0.0
    if acc_e > 0 or acc_o > 0:
        if not groups_e:
            groups_e.append(acc_e)
            groups_o.append(acc_o)
        else:
            groups_e[-1] += acc_e
            groups_o[-1] += acc_o
    return np.array(groups_e), np.array(groups_o)


def chi_square_gof(counts, expected_probs, pool: bool = True, min_expected: float = 5.0) -> GofReport:
    """Pearson chi-square test of ``counts`` against ``expected_probs``.

    With ``pool`` set, adjacent bins are merged left to right until each
    holds an expected count of at least ``min_expected``.
    """
    obs = np.asarray(counts, dtype=float)
    p = np.asarray(expected_probs, dtype=float)
    if obs.shape != p.shape:
        raise ValueError("counts and expected_probs must have the same shape")
    if abs(p.sum() - 1) > 1e-9 or np.any(p < 0):
        raise ValueError(f"expected_probs must be non-negative and sum to 1 (sum={p.sum()!r})")
    n = obs.sum()
    exp = n * p
    if pool:
        exp, obs = _pool(exp, obs, min_expected)
    if exp.size < 2 or np.any(exp < min_expected):
        raise InsufficientExpected(
            f"cannot reach {min_expected} expected counts per bin with {exp.size} bin(s) and n={n:g}"
        )
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = exp.size - 1
    return GofReport(stat, dof, float(_st.chi2.sf(stat, dof)), test="chi-square", extra={"n": n, "bins": int(exp.size)})


def ks_test(samples, cdf) -> GofReport:
    """One-sample Kolmogorov-Smirnov test; ``cdf`` is a vectorized callable."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 10:
        raise ValueError("ks_test needs at least 10 samples")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max((i / n - f).max(), (f - (i - 1) / n).max()))
    return GofReport(d, n, float(_st.kstwo.sf(d, n)), test="kolmogorov-smirnov", extra={"n": n})


def poisson_count_test(counts_per_run, expected_mean: float) -> GofReport:
    """Test event counts from independent runs against Poisson(``expected_mean``).

    Two checks are combined with a Bonferroni bound, ``p = min(1, 2 min(p_mean, p_disp))``:
    an exact two-sided test that the total is Poisson(n mu), and a
    normal-approximation test of the dispersion ``sum (c - mu)^2 / mu``, whose
    Poisson mean and variance are ``n`` and ``n (2 + 1/mu)``.
    """
    c = np.asarray(counts_per_run, dtype=float)
    n = c.size
    if n < 30:
        raise ValueError("poisson_count_test needs at least 30 runs")
    mu = float(expected_mean)
    if mu < 0:
        raise ValueError("expected_mean must be >= 0")
    if mu == 0:
        p = 1.0 if np.all(c == 0) else 0.0
        return GofReport(0.0, n, p, test="poisson-count", extra={"mean": c.mean(), "variance": c.var()})
    total = c.sum()
    pois = _st.poisson(n * mu)
    p_mean = min(1.0, 2 * min(pois.cdf(total), pois.sf(total - 1)))
    disp = float(((c - mu) ** 2).sum() / mu)
    z = (disp - n) / np.sqrt(n * (2 + 1 / mu))
    p_disp = float(2 * _st.norm.sf(abs(z)))
    p = min(1.0, 2 * min(p_mean, p_disp))
    return GofReport(
        disp,
        n,
        float(p),
        test="poisson-count",
        extra={"mean": c.mean(), "variance": c.var(ddof=1), "p_mean": p_mean, "p_dispersion": p_disp},
    )


def sign_test(differences, alternative: str = "greater") -> GofReport:
    """Binomial sign test on non-zero differences; zeros are dropped."""
    d = np.asarray(differences, dtype=float)
    d = d[d != 0]
    n = d.size
    pos = int(np.count_nonzero(d > 0))
    if n == 0:
        return GofReport(0.0, 1, 1.0, test="sign")
    res = _st.binomtest(pos, n, 0.5, alternative=alternative)
    return GofReport(float(pos), n, float(res.pvalue), test="sign", extra={"positive": pos, "n": n})


def binomial_within(k: int, n: int, p: float = 0.5, n_sigma: float = 3.0) -> bool:
    return abs(k - n * p) <= n_sigma * np.sqrt(n * p * (1 - p))


def majority_pass(passes) -> bool:
    """The 2-of-3 seed rule used by statistical acceptance checks."""
    passes = list(passes)
    return sum(bool(x) for x in passes) * 3 >= 2 * len(passes)
