"""Utility experiments for the private low-rank mechanisms.

Monte Carlo estimation of the released matrix's distance to the true best
rank-k approximation (strong metric) and of the excess reconstruction
error (weak metric), dimension sweeps against the sqrt(kd) * sigma_k /
(sigma_k - sigma_{k+1}) scaling prediction, the full-rank noise-norm
identity, and the structural optimality checks for the complex variant's
post-processing step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    HermitianMatrix,
    RealSymmetricMatrix,
    frobenius_distance,
    frobenius_norm,
    hermitian_eig,
    rank_k_truncate,
    real_part,
)
from .mechanisms import (
    MechanismOutput,
    PrivacyParams,
    complex_gaussian_mechanism,
    real_gaussian_mechanism,
)
from .rng import substream

COMPLEX = "complex"
REAL = "real"
OPTIMALITY_TOL = 1e-9


@dataclass(frozen=True)
class SpectrumSpec:
    """Target eigenvalues, non-increasing and nonnegative."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("spectrum must be a nonempty vector")
        if np.any(np.diff(v) > 0) or v[-1] < 0:
            raise ValueError("spectrum must be non-increasing and nonnegative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.size


def clustered_spectrum(d: int, k: int, top: float) -> SpectrumSpec:
    """Top-k eigenvalues all equal to ``top``, the rest zero: the regime
    where per-index gap assumptions fail but the k-th gap is wide."""
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}]")
    v = np.zeros(d)
    v[:k] = top
    return SpectrumSpec(v)


@dataclass(frozen=True)
class UtilityExperimentConfig:
    spectrum: SpectrumSpec
    k: int
    params: PrivacyParams
    replications: int
    master_seed: int | tuple[int, ...]
    variants: tuple[str, ...] = (COMPLEX, REAL)
    fixed_matrix: bool = False
    noise_scale_override: float | None = None

    def __post_init__(self):
        if not 1 <= self.k <= self.spectrum.dim:
            raise ValueError("k must be in [1, d]")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        for v in self.variants:
            if v not in (COMPLEX, REAL):
                raise ValueError(f"unknown variant {v!r}")
        path = (
            (int(self.master_seed),)
            if isinstance(self.master_seed, (int, np.integer))
            else tuple(int(p) for p in self.master_seed)
        )
        object.__setattr__(self, "master_seed", path)


@dataclass(frozen=True)
class VariantStats:
    mean_strong: float
    se_strong: float
    rms_strong: float
    mean_weak: float
    se_weak: float
    rms_weak: float
    n: int


@dataclass(frozen=True)
class UtilityResult:
    per_variant: dict[str, VariantStats]
    bound_value: float
    gap_condition_met: bool
    gap_condition_ratio: float
    metadata: dict


@dataclass(frozen=True)
class SweepResult:
    dims: tuple[int, ...]
    results: dict[int, UtilityResult]
    slope: float | None
    fit_skipped: bool
    variant_fitted: str


@dataclass(frozen=True)
class TightnessReport:
    """Observed full-rank perturbation norm against the 2 d sqrt(T) level."""

    mean_norm: float
    rms_norm: float
    reference: float
    mean_ratio: float
    rms_ratio: float
    n: int


@dataclass(frozen=True)
class OptimalityReport:
    holds: bool
    projection_slack: float
    orthogonality: float
    triangle_slack: float


@dataclass(frozen=True)
class EigengapCheck:
    met: bool
    ratio: float
    threshold: float


def make_test_matrix(spec: SpectrumSpec, rng: np.random.Generator) -> RealSymmetricMatrix:
    """Random symmetric matrix with the prescribed spectrum: Q diag(v) Q^T
    for a Haar-ish orthogonal Q from QR with nonnegative R diagonal."""
    d = spec.dim
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    m = (q * spec.values) @ q.T
    return RealSymmetricMatrix((m + m.T) / 2.0)


def theoretical_bound(
    d: int, k: int, sigma_k: float, sigma_k1: float, epsilon: float, delta: float
) -> float:
    """Constant-free scaling level sqrt(kd) sigma_k/(sigma_k - sigma_{k+1})
    * sqrt(ln(1/delta))/epsilon; meaningful for trends, not absolutes."""
    if not sigma_k > sigma_k1 >= 0:
        raise ValueError("need sigma_k > sigma_{k+1} >= 0")
    return (
        math.sqrt(k * d)
        * sigma_k
        / (sigma_k - sigma_k1)
        * math.sqrt(math.log(1.0 / delta))
        / epsilon
    )


def eigengap_threshold(d: int, params: PrivacyParams) -> float:
    """Gap level 4 sqrt(2 ln(1.25/delta))/epsilon * sqrt(d) = 4 sqrt(T d)."""
    return 4.0 * math.sqrt(params.noise_scale_T * d)


def eigengap_condition_check(
    spec: SpectrumSpec, k: int, params: PrivacyParams
) -> EigengapCheck:
    """Evaluate whether the k-th eigengap clears the utility hypothesis."""
    if not 1 <= k <= spec.dim:
        raise ValueError("k must be in [1, d]")
    sigma_k = spec.values[k - 1]
    sigma_k1 = spec.values[k] if k < spec.dim else 0.0
    threshold = eigengap_threshold(spec.dim, params)
    ratio = float((sigma_k - sigma_k1) / threshold)
    return EigengapCheck(met=bool(ratio >= 1.0), ratio=ratio, threshold=threshold)


def _metrics(
    out: MechanismOutput, m: RealSymmetricMatrix, m_k: RealSymmetricMatrix
) -> tuple[float, float]:
    strong = frobenius_distance(out.y, m_k)
    weak = frobenius_distance(out.y, m) - frobenius_distance(m_k, m)
    return strong, weak


def _stats(values: list[float]) -> tuple[float, float, float]:
    a = np.asarray(values)
    mean = float(a.mean())
    se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
    rms = float(math.sqrt(np.mean(a * a)))
    return mean, se, rms


def run_utility_experiment(config: UtilityExperimentConfig) -> UtilityResult:
    """Monte Carlo over replications: fresh test matrix (unless pinned),
    one substream per (replication, variant), both utility metrics."""
    root = config.master_seed
    k = config.k
    d = config.spectrum.dim
    per_variant_values: dict[str, list[tuple[float, float]]] = {
        v: [] for v in config.variants
    }
    failures = 0
    t0 = time.perf_counter()
    fixed_m = None
    fixed_mk = None
    if config.fixed_matrix:
        fixed_m = make_test_matrix(config.spectrum, substream(*root, 0, 0))
        fixed_mk = real_part(
            rank_k_truncate(hermitian_eig(fixed_m.to_hermitian()), k)
        )
    mech = {COMPLEX: complex_gaussian_mechanism, REAL: real_gaussian_mechanism}
    for rep in range(config.replications):
        if config.fixed_matrix:
            m, m_k = fixed_m, fixed_mk
        else:
            m = make_test_matrix(config.spectrum, substream(*root, rep, 0))
            m_k = real_part(rank_k_truncate(hermitian_eig(m.to_hermitian()), k))
        try:
            for vi, variant in enumerate(config.variants):
                out = mech[variant](
                    m,
                    k,
                    config.params,
                    (*root, rep, 1 + vi),
                    noise_scale_override=config.noise_scale_override,
                )
                per_variant_values[variant].append(_metrics(out, m, m_k))
        except Exception:
            failures += 1
            continue
    per_variant = {}
    for variant, vals in per_variant_values.items():
        strongs = [s for s, _ in vals]
        weaks = [w for _, w in vals]
        ms, ses, rs = _stats(strongs)
        mw, sew, rw = _stats(weaks)
        per_variant[variant] = VariantStats(
            mean_strong=ms, se_strong=ses, rms_strong=rs,
            mean_weak=mw, se_weak=sew, rms_weak=rw, n=len(vals),
        )
    sigma_k = float(config.spectrum.values[k - 1])
    sigma_k1 = float(config.spectrum.values[k]) if k < d else 0.0
    try:
        bound = theoretical_bound(
            d, k, sigma_k, sigma_k1, config.params.epsilon, config.params.delta
        )
    except ValueError:
        bound = math.inf
    check = eigengap_condition_check(config.spectrum, k, config.params)
    return UtilityResult(
        per_variant=per_variant,
        bound_value=bound,
        gap_condition_met=check.met,
        gap_condition_ratio=check.ratio,
        metadata={
            "seed_path": root,
            "replications": config.replications,
            "failures": failures,
            "fixed_matrix": config.fixed_matrix,
            "elapsed_s": time.perf_counter() - t0,
        },
    )


@dataclass(frozen=True)
class SweepConfig:
    k: int
    params: PrivacyParams
    replications: int
    master_seed: int
    gap_multiple: float = 8.0
    variants: tuple[str, ...] = (COMPLEX, REAL)
    noise_scale_override: float | None = None


def dimension_sweep(base: SweepConfig, d_list) -> SweepResult:
    """Run the clustered-spectrum experiment at each dimension, rescaling
    the gap to ``gap_multiple`` times the hypothesis threshold, then fit
    the log-log slope of the complex variant's strong-metric RMS."""
    dims = tuple(int(d) for d in d_list)
    results: dict[int, UtilityResult] = {}
    for d in dims:
        gap = base.gap_multiple * eigengap_threshold(d, base.params)
        config = UtilityExperimentConfig(
            spectrum=clustered_spectrum(d, base.k, gap),
            k=base.k,
            params=base.params,
            replications=base.replications,
            master_seed=(base.master_seed, d),
            variants=base.variants,
            noise_scale_override=base.noise_scale_override,
        )
        results[d] = run_utility_experiment(config)
    fitted_variant = COMPLEX if COMPLEX in base.variants else base.variants[0]
    rms = np.array([results[d].per_variant[fitted_variant].rms_strong for d in dims])
    if len(dims) < 2 or np.any(rms <= 0):
        return SweepResult(dims=dims, results=results, slope=None,
                           fit_skipped=True, variant_fitted=fitted_variant)
    slope = float(np.polyfit(np.log(np.asarray(dims, float)), np.log(rms), 1)[0])
    return SweepResult(dims=dims, results=results, slope=slope,
                       fit_skipped=False, variant_fitted=fitted_variant)


def full_rank_tightness(d: int, t_noise: float, n: int, rng: np.random.Generator) -> TightnessReport:
    """Frobenius norm of the full complex perturbation against 2 d sqrt(T).

    The perturbation has d diagonal entries of variance 4T and d^2 - d
    off-diagonal entries of expected squared modulus 4T, so the squared
    norm has mean exactly 4 d^2 T.
    """
    if n < 100:
        raise ValueError("need n >= 100")
    if not t_noise > 0:
        raise ValueError("noise scale must be positive")
    norms = np.empty(n)
    for i in range(n):
        w1 = rng.standard_normal((d, d))
        w2 = rng.standard_normal((d, d))
        g = w1 + 1j * w2
        norms[i] = math.sqrt(t_noise) * np.linalg.norm(g + g.conj().T)
    reference = 2.0 * d * math.sqrt(t_noise)
    rms = float(math.sqrt(np.mean(norms**2)))
    return TightnessReport(
        mean_norm=float(norms.mean()),
        rms_norm=rms,
        reference=reference,
        mean_ratio=float(norms.mean() / reference),
        rms_ratio=rms / reference,
        n=n,
    )


def postprocessing_optimality_check(
    m_hat_k: HermitianMatrix, y: RealSymmetricMatrix, m_k: RealSymmetricMatrix
) -> OptimalityReport:
    """Structural checks behind the release step: the real and imaginary
    parts of the truncation are Frobenius-orthogonal, the released matrix
    is at least as close to the truncation as the clean rank-k target, and
    hence at most twice the truncation error from it."""
    re = m_hat_k.entries.real
    im = m_hat_k.entries.imag
    norm_sq = frobenius_norm(m_hat_k) ** 2
    ortho = abs(float(np.sum(re * im)))
    d_y = frobenius_distance(m_hat_k.entries, y.entries.astype(complex))
    d_mk = frobenius_distance(m_hat_k.entries, m_k.entries.astype(complex))
    d_y_mk = frobenius_distance(y, m_k)
    projection_slack = d_mk - d_y
    triangle_slack = 2.0 * d_mk - d_y_mk
    holds = (
        projection_slack >= -OPTIMALITY_TOL
        and ortho <= OPTIMALITY_TOL * max(1.0, norm_sq)
        and triangle_slack >= -OPTIMALITY_TOL
    )
    return OptimalityReport(
        holds=bool(holds),
        projection_slack=float(projection_slack),
        orthogonality=ortho,
        triangle_slack=float(triangle_slack),
    )
