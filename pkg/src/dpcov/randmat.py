"""Gaussian ensemble eigenvalue statistics.

Samplers for GUE/GOE eigenvalue draws together with the empirical
statistics the experiment suite runs on them: small-gap tail exponents
(cubic repulsion for GUE, quadratic for GOE), semicircle quantile
locations and their gap bounds, eigenvalue rigidity, and aggregated
bounds for gaps between non-neighboring eigenvalues.

Eigenvalue draws are normalized so the spectrum edge sits at +-2 sqrt(d),
the convention the quantile locations are defined in.  The raw perturbation
samplers produce entry variance 4 (complex) / 2 (real off-diagonal), so the
GUE draw is scaled by 1/2 and the GOE draw by 1/sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import NumericalError, WeylChamberVector
from .mechanisms import sample_complex_perturbation, sample_real_perturbation

GUE = "gue"
GOE = "goe"

QUANTILE_RESIDUAL_TOL = 1e-9
BISECTION_MAX_ITER = 200
GRID_POINTS_PER_DECADE = 12
MIN_TAIL_HITS = 20
TAIL_P_BAND = (2e-3, 0.3)

_EIG_CHUNK = 2048  # draws per batched eigensolve; bounds peak memory


@dataclass(frozen=True)
class GapSampleSet:
    """Independent ordered eigenvalue draws from one Gaussian ensemble."""

    dim: int
    ensemble: str
    values: np.ndarray  # (count, dim), rows non-increasing

    def __post_init__(self):
        if self.ensemble not in (GUE, GOE):
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise ValueError("values must have shape (count, dim)")
        if np.any(np.diff(v, axis=1) > 0):
            raise ValueError("each draw must be sorted non-increasing")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    def gaps(self, i: int) -> np.ndarray:
        """Per-draw adjacent gap at 1-based index i (1 <= i < dim)."""
        if not 1 <= i < self.dim:
            raise ValueError(f"gap index must be in [1, {self.dim - 1}], got {i}")
        return self.values[:, i - 1] - self.values[:, i]


@dataclass(frozen=True)
class ClassicalLocations:
    """Semicircle quantile locations omega_1 > ... > omega_{d+1}.

    omega_1 = 2 sqrt(d), omega_{d+1} = -2 sqrt(d); the interior entries
    solve d * integral_{omega_i / sqrt(d)}^inf rho = i - 1.
    """

    dim: int
    omega: np.ndarray  # length dim + 1, strictly decreasing

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        if w.shape != (self.dim + 1,):
            raise ValueError("omega must have length dim + 1")
        if np.any(np.diff(w) >= 0):
            raise ValueError("omega must be strictly decreasing")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)


@dataclass(frozen=True)
class RigidityFactor:
    """Slack factor (ln d)^(L ln ln d) used as the deviation threshold."""

    dim: int
    L: float = 1.0
    value: float = field(init=False)

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError("rigidity factor needs dim >= 3")
        ln_d = math.log(self.dim)
        object.__setattr__(self, "value", ln_d ** (self.L * math.log(ln_d)))


@dataclass(frozen=True)
class GapCdfTable:
    """Empirical CDF of one adjacent gap on a log-spaced grid, with
    95% Wilson intervals."""

    index: int
    scale: float
    s: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    hits: np.ndarray
    n: int


@dataclass(frozen=True)
class GapTailEstimate:
    """Fitted log-log slope of the small-gap tail."""

    index: int
    slope: float
    intercept: float
    fit_range: tuple[float, float]
    r_squared: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 5:
            raise ValueError("a tail fit needs at least 5 grid points")
        if not self.fit_range[0] < self.fit_range[1]:
            raise ValueError("fit range must be nondegenerate")
        if not math.isfinite(self.slope):
            raise ValueError("slope must be finite")


@dataclass(frozen=True)
class UnderpoweredFit:
    """Tail fit declined: too few grid points carried enough hits."""

    index: int
    n_points: int
    hit_counts: tuple[int, ...]
    required_points: int = 5
    required_hits: int = MIN_TAIL_HITS


@dataclass(frozen=True)
class GapBoundsReport:
    """Per-index check of the quantile-location gap envelope."""

    holds: bool
    violations: tuple[int, ...]
    worst_margin: float


@dataclass(frozen=True)
class RigidityReport:
    """Distribution of the per-draw worst normalized deviation from the
    quantile locations."""

    statistics: np.ndarray
    threshold: float
    exceed_fraction: float


@dataclass(frozen=True)
class SumGapReport:
    """Empirical check that a wide gap is no lighter-tailed than twice its
    worst constituent adjacent gap."""

    holds: bool
    underpowered: bool
    lhs_p: float
    lhs_ci: tuple[float, float]
    rhs_p: float
    rhs_ci: tuple[float, float]
    lhs_threshold: float
    constituent_threshold: float


def semicircle_density(x: float) -> float:
    """rho(x) = (1/2pi) sqrt(max(4 - x^2, 0))."""
    return math.sqrt(max(4.0 - x * x, 0.0)) / (2.0 * math.pi)


def semicircle_cdf(x) -> np.ndarray | float:
    """Mass of the semicircle density on (-inf, x]; closed form."""
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    val = 0.5 + (x * np.sqrt(4.0 - x * x) + 4.0 * np.arcsin(x / 2.0)) / (4.0 * np.pi)
    return val if val.ndim else float(val)


def classical_locations(d: int) -> ClassicalLocations:
    """Solve the semicircle quantile equation for each eigenvalue index.

    Interior locations are found by bisection on the closed-form CDF; the
    endpoints are pinned to +-2 sqrt(d) analytically.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    sqrt_d = math.sqrt(d)
    omega = np.empty(d + 1)
    omega[0] = 2.0 * sqrt_d
    omega[d] = -2.0 * sqrt_d
    if d > 1:
        targets = (np.arange(2, d + 1) - 1.0) / d  # survival mass above omega_i
        lo = np.full(targets.shape, -2.0)
        hi = np.full(targets.shape, 2.0)
        for _ in range(BISECTION_MAX_ITER):
            mid = 0.5 * (lo + hi)
            surv = 1.0 - semicircle_cdf(mid)
            too_high = surv > targets  # mid is left of the quantile
            lo = np.where(too_high, mid, lo)
            hi = np.where(too_high, hi, mid)
            if np.all(hi - lo <= 4.0 * np.finfo(float).eps):
                break
        x = 0.5 * (lo + hi)
        resid = np.abs(d * (1.0 - semicircle_cdf(x)) - (np.arange(2, d + 1) - 1.0))
        if resid.max() > QUANTILE_RESIDUAL_TOL:
            raise NumericalError(
                f"quantile bisection residual {resid.max():.3e} exceeds "
                f"{QUANTILE_RESIDUAL_TOL:.0e} after {BISECTION_MAX_ITER} iterations",
                residual=float(resid.max()),
            )
        omega[1:d] = sqrt_d * x
    return ClassicalLocations(dim=d, omega=omega)


def classical_gap_bounds_check(loc: ClassicalLocations) -> GapBoundsReport:
    """Check d^(-1/6) m_i^(-1/3) <= omega_i - omega_{i+1} <= 2 pi d^(-1/6)
    m_i^(-1/3) with m_i = min(i, d - i + 1), for every 1 <= i <= d."""
    d = loc.dim
    gaps = -np.diff(loc.omega)
    i = np.arange(1, d + 1)
    m = np.minimum(i, d - i + 1)
    ref = d ** (-1.0 / 6.0) * m ** (-1.0 / 3.0)
    lower = ref
    upper = 2.0 * np.pi * ref
    margin = np.minimum(gaps - lower, upper - gaps)
    bad = np.where(margin < 0)[0]
    return GapBoundsReport(
        holds=bool(bad.size == 0),
        violations=tuple(int(b + 1) for b in bad),
        worst_margin=float(margin.min()),
    )


def sample_ensemble_eigenvalues(
    d: int, ensemble: str, n: int, rng: np.random.Generator
) -> GapSampleSet:
    """Draw n independent ordered eigenvalue vectors from the GUE or GOE,
    normalized to spectrum edge +-2 sqrt(d)."""
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if ensemble not in (GUE, GOE):
        raise ValueError(f"unknown ensemble {ensemble!r}")
    out = np.empty((n, d))
    done = 0
    while done < n:
        m = min(_EIG_CHUNK, n - done)
        if ensemble == GUE:
            w1 = rng.standard_normal((m, d, d))
            w2 = rng.standard_normal((m, d, d))
            g = w1 + 1j * w2
            mats = 0.5 * (g + g.conj().transpose(0, 2, 1))
        else:
            w1 = rng.standard_normal((m, d, d))
            mats = (w1 + w1.transpose(0, 2, 1)) / math.sqrt(2.0)
        vals = np.linalg.eigvalsh(mats)
        out[done : done + m] = vals[:, ::-1]
        done += m
    return GapSampleSet(dim=d, ensemble=ensemble, values=out)


def single_ensemble_draw(
    d: int, ensemble: str, rng: np.random.Generator
) -> WeylChamberVector:
    """One ordered eigenvalue draw in the edge-2 sqrt(d) normalization."""
    if ensemble == GUE:
        a = 0.5 * sample_complex_perturbation(d, rng).entries
    elif ensemble == GOE:
        a = sample_real_perturbation(d, rng).entries / math.sqrt(2.0)
    else:
        raise ValueError(f"unknown ensemble {ensemble!r}")
    return WeylChamberVector(np.linalg.eigvalsh(a)[::-1])


def wilson_interval(hits: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def empirical_gap_cdf(
    sample_set: GapSampleSet, i: int, scale: float
) -> GapCdfTable:
    """Empirical CDF of gap i in units of ``scale`` on a log-spaced grid
    (12 points per decade), with Wilson confidence bounds."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    g = np.sort(sample_set.gaps(i) / scale)
    n = g.size
    positive = g[g > 0]
    if positive.size == 0:
        raise ValueError("all gaps are zero; nothing to tabulate")
    lo = float(np.quantile(positive, min(1.0, 5.0 / positive.size)))
    hi = float(positive[-1]) * 1.001
    if lo >= hi:
        lo = hi / 10.0
    num = max(2, int(math.ceil(math.log10(hi / lo) * GRID_POINTS_PER_DECADE)) + 1)
    s = np.geomspace(lo, hi, num)
    hits = np.searchsorted(g, s, side="right")
    p_hat = hits / n
    ci = np.array([wilson_interval(int(h), n) for h in hits])
    return GapCdfTable(
        index=i,
        scale=scale,
        s=s,
        p_hat=p_hat,
        ci_lo=ci[:, 0],
        ci_hi=ci[:, 1],
        hits=hits.astype(int),
        n=n,
    )


def gap_tail_exponent(
    sample_set: GapSampleSet,
    i: int,
    fit_range: tuple[float, float] | None = None,
    *,
    scale: float | None = None,
    p_band: tuple[float, float] = TAIL_P_BAND,
    min_hits: int = MIN_TAIL_HITS,
    table: GapCdfTable | None = None,
) -> GapTailEstimate | UnderpoweredFit:
    """Least-squares slope of log P(gap <= s) against log s over the tail.

    With an explicit ``fit_range`` the fit uses the grid points inside it
    (still requiring ``min_hits`` per point); otherwise points are selected
    by the probability band ``p_band``.  Returns an UnderpoweredFit rather
    than extrapolating when fewer than 5 points qualify.
    """
    if table is None:
        if scale is None:
            scale = 1.0 / (
                RigidityFactor(sample_set.dim).value * math.sqrt(sample_set.dim)
            )
        table = empirical_gap_cdf(sample_set, i, scale)
    mask = table.hits >= min_hits
    if fit_range is not None:
        mask &= (table.s >= fit_range[0]) & (table.s <= fit_range[1])
    else:
        mask &= (table.p_hat >= p_band[0]) & (table.p_hat <= p_band[1])
    sel = np.where(mask)[0]
    if sel.size < 5:
        return UnderpoweredFit(
            index=i,
            n_points=int(sel.size),
            hit_counts=tuple(int(h) for h in table.hits[sel]),
        )
    xs = np.log(table.s[sel])
    ys = np.log(table.p_hat[sel])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return GapTailEstimate(
        index=i,
        slope=float(slope),
        intercept=float(intercept),
        fit_range=(float(table.s[sel[0]]), float(table.s[sel[-1]])),
        r_squared=r2,
        n_points=int(sel.size),
    )


def rigidity_statistic(
    sample_set: GapSampleSet, loc: ClassicalLocations, rf: RigidityFactor
) -> RigidityReport:
    """Per draw, the worst deviation |eta_i - omega_i| scaled by the local
    density factor min(i, d-i+1)^(1/3) d^(1/6); reports the fraction of
    draws exceeding the rigidity threshold."""
    d = sample_set.dim
    if loc.dim != d or rf.dim != d:
        raise ValueError("sample set, locations, and factor dims must match")
    i = np.arange(1, d + 1)
    weight = np.minimum(i, d - i + 1) ** (1.0 / 3.0) * d ** (1.0 / 6.0)
    dev = np.abs(sample_set.values - loc.omega[:d]) * weight
    stats = dev.max(axis=1)
    return RigidityReport(
        statistics=stats,
        threshold=rf.value,
        exceed_fraction=float(np.mean(stats > rf.value)),
    )


def joint_density_log(eta: WeylChamberVector, beta: int) -> float:
    """Unnormalized log joint eigenvalue density:
    sum_{i<j} beta ln|eta_i - eta_j| - (1/2) sum eta_i^2.

    Repeated coordinates give -inf (zero density).
    """
    if beta not in (1, 2):
        raise ValueError(f"beta must be 1 or 2, got {beta}")
    x = eta.coords
    if x.size > 1:
        diffs = x[:, None] - x[None, :]
        upper = diffs[np.triu_indices(x.size, k=1)]
        if np.any(upper == 0):
            return float("-inf")
        rep = float(beta * np.sum(np.log(np.abs(upper))))
    else:
        rep = 0.0
    return rep - 0.5 * float(np.sum(x * x))


def sum_gap_probability_check(
    sample_set: GapSampleSet,
    i: int,
    j: int,
    s: float,
    rf: RigidityFactor | None = None,
) -> SumGapReport:
    """Check P(eta_i - eta_j <= (j-i) s u) <= 2 max_l P(gap_l <= 2 s u)
    within Wilson confidence slack, where u = 1/(b sqrt(d)).

    A wide gap is a sum of j-i adjacent gaps; if at most half of them are
    below 2su the sum exceeds (j-i)su, so the wide-gap tail is controlled
    by twice the worst adjacent-gap tail.
    """
    d = sample_set.dim
    if not 1 <= i < j <= d:
        raise ValueError(f"need 1 <= i < j <= {d}, got i={i}, j={j}")
    if rf is None:
        rf = RigidityFactor(d)
    u = 1.0 / (rf.value * math.sqrt(d))
    wide = sample_set.values[:, i - 1] - sample_set.values[:, j - 1]
    n = sample_set.count
    lhs_thr = (j - i) * s * u
    lhs_hits = int(np.sum(wide <= lhs_thr))
    lhs_p = lhs_hits / n
    lhs_ci = wilson_interval(lhs_hits, n)
    constituent_thr = 2.0 * s * u
    best_p, best_hits = 0.0, 0
    for ell in range(i, j):
        hits = int(np.sum(sample_set.gaps(ell) <= constituent_thr))
        if hits / n >= best_p:
            best_p, best_hits = hits / n, hits
    rhs_ci = wilson_interval(best_hits, n)
    underpowered = best_hits < MIN_TAIL_HITS and lhs_hits < MIN_TAIL_HITS
    holds = lhs_ci[0] <= 2.0 * rhs_ci[1]
    return SumGapReport(
        holds=bool(holds),
        underpowered=bool(underpowered),
        lhs_p=lhs_p,
        lhs_ci=lhs_ci,
        rhs_p=best_p,
        rhs_ci=rhs_ci,
        lhs_threshold=lhs_thr,
        constituent_threshold=constituent_thr,
    )
