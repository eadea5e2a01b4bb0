"""Dense complex Hermitian linear algebra.

Immutable matrix value types, a deterministic eigensolver with a fixed
phase convention, rank-k truncation, matrix norms, and checkers for the
deterministic eigenvalue/eigenvector perturbation inequalities (Weyl,
Davis-Kahan) used throughout the experiment suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITICITY_TOL = 1e-12
ORTHONORMALITY_TOL = 1e-8
RECONSTRUCTION_TOL = 1e-8
DEGENERACY_REL_GAP = 1e-10


class DimensionMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class NumericalError(RuntimeError):
    """An eigensolve or iteration failed to converge; carries the residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def _as_array(m) -> np.ndarray:
    """Accept a matrix value type or a bare ndarray."""
    return m.entries if hasattr(m, "entries") else np.asarray(m)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HermitianMatrix:
    """A d x d complex matrix with exact Hermitian symmetry.

    The constructor validates the input is Hermitian within a small
    tolerance and then symmetrizes, so stored entries satisfy
    ``entries[i, j] == conj(entries[j, i])`` bitwise.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
            raise ValueError("matrix entries must be finite")
        scale = max(1.0, float(np.abs(a).max()))
        dev = float(np.abs(a - a.conj().T).max())
        if dev > HERMITICITY_TOL * scale:
            raise ValueError(
                f"matrix is not Hermitian: max |A - A*| = {dev:.3e} "
                f"exceeds {HERMITICITY_TOL:.0e} * {scale:.3e}"
            )
        object.__setattr__(self, "entries", _frozen((a + a.conj().T) / 2.0))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class RealSymmetricMatrix:
    """A d x d real matrix with exact symmetry."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        scale = max(1.0, float(np.abs(a).max()))
        dev = float(np.abs(a - a.T).max())
        if dev > HERMITICITY_TOL * scale:
            raise ValueError(
                f"matrix is not symmetric: max |A - A^T| = {dev:.3e}"
            )
        object.__setattr__(self, "entries", _frozen((a + a.T) / 2.0))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def to_hermitian(self) -> HermitianMatrix:
        return HermitianMatrix(self.entries.astype(complex))


@dataclass(frozen=True)
class WeylChamberVector:
    """An ordered (non-increasing) real vector of eigenvalue-type data."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("expected a nonempty 1-d vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("coordinates must be finite")
        if np.any(np.diff(c) > 0):
            raise ValueError("coordinates must be non-increasing")
        object.__setattr__(self, "coords", _frozen(c))

    @property
    def dim(self) -> int:
        return self.coords.size

    def gaps(self) -> np.ndarray:
        """Adjacent differences coords[i] - coords[i+1], all >= 0."""
        return -np.diff(self.coords)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in non-increasing order with an orthonormal eigenbasis."""

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        u = np.asarray(self.vectors, dtype=complex)
        d = v.size
        if u.shape != (d, d):
            raise ValueError("vectors must be square and match values length")
        if np.any(np.diff(v) > 0):
            raise ValueError("eigenvalues must be non-increasing")
        gram_dev = float(np.abs(u.conj().T @ u - np.eye(d)).max())
        if gram_dev > ORTHONORMALITY_TOL:
            raise ValueError(
                f"eigenvector columns not orthonormal: deviation {gram_dev:.3e}"
            )
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "vectors", _frozen(u))

    @property
    def dim(self) -> int:
        return self.values.size

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of a deterministic matrix-inequality check."""

    holds: bool
    worst_margin: float
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DavisKahanReport:
    """Outcome of a subspace-perturbation (sin-theta) check.

    ``feasible`` is False when no positive spectral separation exists for
    the requested split; in that case no bound is asserted.
    """

    feasible: bool
    holds: bool
    delta: float
    lhs_frobenius: float
    lhs_operator: float
    rhs_frobenius: float
    rhs_operator: float


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive.

    Ties on magnitude break to the lowest row index, which np.argmax
    already guarantees.
    """
    u = vectors.copy()
    idx = np.argmax(np.abs(u), axis=0)
    pivots = u[idx, np.arange(u.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    return u / phases


def hermitian_eig(h: HermitianMatrix) -> SpectralDecomposition:
    """Diagonalize a Hermitian matrix with deterministic output.

    Eigenvalues are returned in non-increasing order with eigenvectors
    permuted in lockstep; each eigenvector's phase is fixed so that its
    largest-magnitude entry is real and positive.  Within a numerically
    degenerate eigenvalue cluster the individual vectors are basis
    dependent; compare projectors there, not columns.
    """
    a = h.entries
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    vals = vals[::-1].copy()
    vecs = _fix_phases(vecs[:, ::-1])
    dec = SpectralDecomposition(values=vals, vectors=vecs)
    resid = float(np.linalg.norm(dec.reconstruct() - a))
    bound = RECONSTRUCTION_TOL * (1.0 + float(np.linalg.norm(a)))
    if resid > bound:
        raise NumericalError(
            f"eigendecomposition residual {resid:.3e} exceeds {bound:.3e}",
            residual=resid,
        )
    return dec


def rank_k_truncate(dec: SpectralDecomposition, k: int) -> HermitianMatrix:
    """Keep the k algebraically largest eigenvalues, zero the rest."""
    d = dec.dim
    if not 0 <= k <= d:
        raise ValueError(f"k must be in [0, {d}], got {k}")
    kept = np.zeros(d)
    kept[:k] = dec.values[:k]
    m = (dec.vectors * kept) @ dec.vectors.conj().T
    return HermitianMatrix((m + m.conj().T) / 2.0)


def real_part(h: HermitianMatrix) -> RealSymmetricMatrix:
    """Entrywise real part; exactly symmetric because the input is Hermitian."""
    return RealSymmetricMatrix(h.entries.real.copy())


def frobenius_distance(a, b) -> float:
    """sqrt(sum |a_ij - b_ij|^2) over equal-shaped matrices."""
    x = _as_array(a)
    y = _as_array(b)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"shape {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y))


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(_as_array(a)))


def frobenius_inner(a, b) -> complex:
    """<A, B> = sum conj(A_ij) * B_ij (conjugation on the left factor)."""
    x = _as_array(a)
    y = _as_array(b)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"shape {x.shape} vs {y.shape}")
    return complex(np.vdot(x, y))


def spectral_norm(a) -> float:
    """Largest singular value; equals max |eigenvalue| for Hermitian input."""
    x = _as_array(a)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def check_weyl(a: HermitianMatrix, b: HermitianMatrix, tol: float = 1e-8) -> InequalityReport:
    """Check the additive eigenvalue sandwich for a Hermitian pair.

    For every i:  sigma_i(A) + sigma_d(B) - tol <= sigma_i(A+B)
                  <= sigma_i(A) + sigma_1(B) + tol.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dim {a.dim} vs {b.dim}")
    sa = hermitian_eig(a).values
    sb = hermitian_eig(b).values
    ssum = hermitian_eig(HermitianMatrix(a.entries + b.entries)).values
    lower_slack = ssum - (sa + sb[-1])
    upper_slack = (sa + sb[0]) - ssum
    worst = float(min(lower_slack.min(), upper_slack.min()))
    return InequalityReport(
        holds=bool(worst >= -tol),
        worst_margin=worst,
        detail={
            "worst_index": int(np.argmin(np.minimum(lower_slack, upper_slack))),
            "tol": tol,
        },
    )


def check_davis_kahan(
    a: HermitianMatrix, a_hat: HermitianMatrix, k: int, tol: float = 1e-8
) -> DavisKahanReport:
    """Check the sin-theta bound for the top-k eigenspace split.

    The largest admissible separation Delta is computed from the two
    spectra: the distance from every trailing eigenvalue of ``a_hat`` to
    the interval spanned by the leading k eigenvalues of ``a``.  If some
    trailing eigenvalue falls inside that interval, no positive Delta
    exists and the check is reported infeasible rather than failed.
    """
    if a.dim != a_hat.dim:
        raise DimensionMismatchError(f"dim {a.dim} vs {a_hat.dim}")
    d = a.dim
    if not 1 <= k <= d - 1:
        raise ValueError(f"split index k must be in [1, {d - 1}], got {k}")
    dec = hermitian_eig(a)
    dec_hat = hermitian_eig(a_hat)
    top_lo, top_hi = dec.values[k - 1], dec.values[0]
    tail = dec_hat.values[k:]
    margins = np.maximum(top_lo - tail, tail - top_hi)
    delta = float(margins.min())
    if delta <= 0:
        return DavisKahanReport(False, False, delta, np.nan, np.nan, np.nan, np.nan)
    p = dec.vectors[:, :k] @ dec.vectors[:, :k].conj().T
    p_hat = dec_hat.vectors[:, :k] @ dec_hat.vectors[:, :k].conj().T
    diff = a_hat.entries - a.entries
    lhs_f = float(np.linalg.norm(p - p_hat))
    lhs_2 = spectral_norm(p - p_hat)
    rhs_f = float(np.linalg.norm(diff)) / delta
    rhs_2 = spectral_norm(diff) / delta
    holds = lhs_f <= rhs_f + tol and lhs_2 <= rhs_2 + tol
    return DavisKahanReport(True, bool(holds), delta, lhs_f, lhs_2, rhs_f, rhs_2)
