"""Differentially private low-rank covariance mechanisms.

Two (epsilon, delta)-DP mechanisms built on symmetric Gaussian matrix
perturbations: the complex variant perturbs with a Hermitian noise matrix
(W1 + i*W2) + (W1 + i*W2)^*, truncates to rank k, and returns the closest
real symmetric rank-k matrix; the real baseline perturbs with W1 + W1^T
and truncates.  Both are pure functions of (input, seed).

Privacy rests on the decomposition of the complex perturbation into the
real perturbation plus input-independent imaginary noise, i.e. the complex
mechanism post-processes the real one; ``post_processing_decomposition_check``
verifies that identity holds entrywise exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    HermitianMatrix,
    RealSymmetricMatrix,
    SpectralDecomposition,
    WeylChamberVector,
    hermitian_eig,
    rank_k_truncate,
    real_part,
)
from .rng import substream

PSD_REL_TOL = 1e-8
NUMERICAL_RANK_REL_TOL = 1e-8
SPECTRUM_CAP_EXPONENT = 50  # warn (never reject) above sigma_1 > d**50


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget with the derived per-entry noise variance.

    noise_scale_T = 2 ln(1.25/delta) / epsilon^2.
    """

    epsilon: float
    delta: float
    noise_scale_T: float = field(init=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        object.__setattr__(
            self, "noise_scale_T", noise_scale(self.epsilon, self.delta)
        )


@dataclass(frozen=True)
class DataMatrix:
    """An m x d real data matrix whose rows are norm-clipped."""

    entries: np.ndarray
    row_bound: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("data entries must be finite")
        if not self.row_bound > 0:
            raise ValueError("row_bound must be positive")
        norms = np.linalg.norm(a, axis=1)
        if np.any(norms > self.row_bound * (1 + 1e-12)):
            raise ValueError("rows exceed the clipping bound; use clip_rows first")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class MechanismOutput:
    """One mechanism draw.

    ``y`` is the released real symmetric matrix of rank <= k; ``m_hat_k``
    the complex rank-k truncation it was projected from; ``m_hat_values``
    the full noisy spectrum; ``seed_record`` the seed path when the caller
    passed one (None when a live generator was supplied).
    """

    y: RealSymmetricMatrix
    m_hat_k: HermitianMatrix
    m_hat_values: WeylChamberVector
    seed_record: tuple[int, ...] | None


@dataclass(frozen=True)
class DecompositionReport:
    """Entrywise verification that the complex perturbation splits into the
    real perturbation plus input-independent imaginary noise."""

    max_deviation: float
    holds: bool


def noise_scale(epsilon: float, delta: float) -> float:
    """Noise variance T = 2 ln(1.25/delta) / epsilon^2."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    return 2.0 * np.log(1.25 / delta) / (epsilon * epsilon)


def sample_complex_perturbation(d: int, rng: np.random.Generator) -> HermitianMatrix:
    """Draw G = (W1 + i W2) + (W1 + i W2)^* with standard normal W1, W2.

    Diagonal entries are real with variance 4; each off-diagonal entry has
    independent real and imaginary parts of variance 2.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    w1 = rng.standard_normal((d, d))
    w2 = rng.standard_normal((d, d))
    g = w1 + 1j * w2
    return HermitianMatrix(g + g.conj().T)


def sample_real_perturbation(d: int, rng: np.random.Generator) -> RealSymmetricMatrix:
    """Draw W1 + W1^T with standard normal W1 (diagonal variance 4,
    off-diagonal variance 2)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    w1 = rng.standard_normal((d, d))
    return RealSymmetricMatrix(w1 + w1.T)


def clip_rows(raw: np.ndarray, bound: float = 1.0) -> DataMatrix:
    """Rescale any row with Euclidean norm above ``bound`` down to it."""
    a = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("data entries must be finite")
    norms = np.linalg.norm(a, axis=1)
    out = a.copy()
    over = norms > bound
    if np.any(over):
        out[over] = a[over] * (bound / norms[over])[:, None]
    return DataMatrix(out, row_bound=bound)


def covariance_from_data(data: DataMatrix) -> RealSymmetricMatrix:
    """Gram matrix A^T A of the clipped data; positive semidefinite."""
    a = data.entries
    return RealSymmetricMatrix(a.T @ a)


def _resolve_rng(rng) -> tuple[np.random.Generator, tuple[int, ...] | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    if isinstance(rng, (int, np.integer)):
        path = (int(rng),)
    else:
        path = tuple(int(p) for p in rng)
    return substream(*path), path


def _validate_input(m: RealSymmetricMatrix, k: int, allow_indefinite: bool) -> None:
    d = m.dim
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    eigs = np.linalg.eigvalsh(m.entries)
    scale = max(abs(eigs[0]), abs(eigs[-1]))
    if eigs[0] < -PSD_REL_TOL * scale:
        msg = (
            f"input is not PSD within tolerance: smallest eigenvalue "
            f"{eigs[0]:.3e} < -{PSD_REL_TOL:.0e} * {scale:.3e}"
        )
        if allow_indefinite:
            warnings.warn(msg)
        else:
            raise ValueError(msg)
    if eigs[-1] > float(d) ** SPECTRUM_CAP_EXPONENT:
        warnings.warn(
            f"top eigenvalue {eigs[-1]:.3e} exceeds d^{SPECTRUM_CAP_EXPONENT}; "
            "utility guarantees are not calibrated this far out"
        )


def _closest_real_rank_k(m_hat_k: HermitianMatrix, k: int) -> RealSymmetricMatrix:
    """Frobenius-closest real symmetric matrix of rank <= k to ``m_hat_k``.

    The imaginary part of a Hermitian matrix is antisymmetric, hence
    Frobenius-orthogonal to every real symmetric matrix, so the minimizer
    is the best rank-k approximation of the real part: keep the k
    eigenvalues of largest magnitude.  (The real part itself generically
    has rank 2k, so plain real-part extraction would not be rank-k.)
    """
    re = real_part(m_hat_k)
    dec = hermitian_eig(re.to_hermitian())
    order = np.argsort(-np.abs(dec.values), kind="stable")
    keep = np.zeros(dec.dim)
    keep[order[:k]] = dec.values[order[:k]]
    y = (dec.vectors * keep) @ dec.vectors.conj().T
    return RealSymmetricMatrix(y.real)


def _run_mechanism(
    m: RealSymmetricMatrix,
    k: int,
    params: PrivacyParams,
    rng,
    complex_noise: bool,
    allow_indefinite: bool,
    noise_scale_override: float | None,
) -> MechanismOutput:
    _validate_input(m, k, allow_indefinite)
    gen, seed_record = _resolve_rng(rng)
    t = params.noise_scale_T if noise_scale_override is None else noise_scale_override
    d = m.dim
    if complex_noise:
        pert = sample_complex_perturbation(d, gen).entries
    else:
        pert = sample_real_perturbation(d, gen).entries.astype(complex)
    m_hat = HermitianMatrix(m.entries + np.sqrt(t) * pert)
    dec = hermitian_eig(m_hat)
    m_hat_k = rank_k_truncate(dec, k)
    y = _closest_real_rank_k(m_hat_k, k)
    return MechanismOutput(
        y=y,
        m_hat_k=m_hat_k,
        m_hat_values=WeylChamberVector(dec.values),
        seed_record=seed_record,
    )


def complex_gaussian_mechanism(
    m: RealSymmetricMatrix,
    k: int,
    params: PrivacyParams,
    rng,
    *,
    allow_indefinite: bool = False,
    noise_scale_override: float | None = None,
) -> MechanismOutput:
    """Perturb M by sqrt(T) times a Hermitian complex Gaussian matrix,
    truncate to rank k, and release the closest real symmetric rank-k
    matrix.

    ``rng`` may be a numpy Generator or an integer seed / seed path;
    passing a seed records it in the output.  ``noise_scale_override``
    replaces the derived variance T (a zero value gives the noiseless
    baseline, useful in tests).
    """
    return _run_mechanism(
        m, k, params, rng, True, allow_indefinite, noise_scale_override
    )


def real_gaussian_mechanism(
    m: RealSymmetricMatrix,
    k: int,
    params: PrivacyParams,
    rng,
    *,
    allow_indefinite: bool = False,
    noise_scale_override: float | None = None,
) -> MechanismOutput:
    """Baseline variant: perturb by sqrt(T) (W1 + W1^T) and truncate."""
    return _run_mechanism(
        m, k, params, rng, False, allow_indefinite, noise_scale_override
    )


def post_processing_decomposition_check(
    m: RealSymmetricMatrix, w1: np.ndarray, w2: np.ndarray
) -> DecompositionReport:
    """Verify M + [(W1+iW2) + (W1+iW2)^*] == [M + W1 + W1^T] + [iW2 + (iW2)^*]
    entrywise.

    Both sides are assembled in the same association order, so the
    deviation is exactly zero in floating point; a nonzero value means the
    perturbation routing is broken.
    """
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    g = w1 + 1j * w2
    complex_route = m.entries + (g + g.conj().T)
    iw2 = 1j * w2
    real_route = (m.entries + (w1 + w1.T)) + (iw2 + iw2.conj().T)
    dev = float(np.abs(complex_route - real_route).max())
    return DecompositionReport(max_deviation=dev, holds=bool(dev == 0.0))


def numerical_rank(m, rel_tol: float = NUMERICAL_RANK_REL_TOL) -> int:
    """Count singular values above rel_tol times the largest."""
    a = m.entries if hasattr(m, "entries") else np.asarray(m)
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))
