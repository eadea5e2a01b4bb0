"""Self-check suite behind the ``verify`` CLI command.

Runs the deterministic inequality checkers and mechanism structure checks
on seeded random instances and the quantile-location gap bounds across a
dimension ladder.  Hermetic: no network, no file writes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .experiments import postprocessing_optimality_check
from .linalg import (
    HermitianMatrix,
    RealSymmetricMatrix,
    check_davis_kahan,
    check_weyl,
    hermitian_eig,
    rank_k_truncate,
    real_part,
)
from .mechanisms import (
    PrivacyParams,
    complex_gaussian_mechanism,
    numerical_rank,
    post_processing_decomposition_check,
)
from .randmat import classical_gap_bounds_check, classical_locations
from .rng import substream

CHECK_TOL = 1e-8
MECH_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_hermitian(d: int, rng: np.random.Generator) -> HermitianMatrix:
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return HermitianMatrix(a + a.conj().T)


def weyl_suite(n_pairs: int, seed: int) -> CheckResult:
    rng = substream(seed, 101)
    worst = np.inf
    for _ in range(n_pairs):
        d = int(rng.integers(2, 17))
        report = check_weyl(_random_hermitian(d, rng), _random_hermitian(d, rng),
                            tol=CHECK_TOL)
        worst = min(worst, report.worst_margin)
        if not report.holds:
            return CheckResult(
                "weyl", False,
                f"violated at margin {report.worst_margin:.3e} (d={d})",
            )
    return CheckResult("weyl", True, f"{n_pairs} pairs, worst margin {worst:.3e}")


def davis_kahan_suite(n_instances: int, seed: int) -> CheckResult:
    rng = substream(seed, 102)
    d = 8
    for _ in range(n_instances):
        spread = np.sort(rng.uniform(1.0, float(d + 1), size=d))[::-1]
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
        a = HermitianMatrix(((q * spread) @ q.T).astype(complex))
        e = _random_hermitian(d, rng).entries
        e *= 0.02 / max(1e-30, np.linalg.norm(e, 2))
        a_hat = HermitianMatrix(a.entries + e)
        k = int(rng.integers(1, d))
        report = check_davis_kahan(a, a_hat, k, tol=CHECK_TOL)
        if not report.feasible:
            continue  # separation collapsed for this split; no claim made
        if not report.holds:
            return CheckResult(
                "davis-kahan", False,
                f"violated: lhs_F={report.lhs_frobenius:.3e} "
                f"rhs_F={report.rhs_frobenius:.3e} delta={report.delta:.3e}",
            )
    return CheckResult("davis-kahan", True, f"{n_instances} perturbed pairs")


def mechanism_structure_suite(n_instances: int, seed: int) -> CheckResult:
    rng = substream(seed, 103)
    d = 8
    params = PrivacyParams(epsilon=1.0, delta=0.05)
    for idx in range(n_instances):
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
        spectrum = np.sort(rng.uniform(0.0, 50.0, size=d))[::-1]
        m = RealSymmetricMatrix((q * spectrum) @ q.T)
        k = int(rng.integers(1, d + 1))
        out = complex_gaussian_mechanism(m, k, params, (seed, 103, idx))
        if float(np.abs(out.y.entries - out.y.entries.T).max()) != 0.0:
            return CheckResult("mechanism-structure", False, "output not symmetric")
        if numerical_rank(out.y) > k:
            return CheckResult(
                "mechanism-structure", False,
                f"numerical rank {numerical_rank(out.y)} > k={k}",
            )
        m_k = real_part(rank_k_truncate(hermitian_eig(m.to_hermitian()), k))
        opt = postprocessing_optimality_check(out.m_hat_k, out.y, m_k)
        if not opt.holds:
            return CheckResult(
                "mechanism-structure", False,
                f"optimality chain broken: projection slack "
                f"{opt.projection_slack:.3e}, orthogonality {opt.orthogonality:.3e}",
            )
        w1 = rng.standard_normal((d, d))
        w2 = rng.standard_normal((d, d))
        decomp = post_processing_decomposition_check(m, w1, w2)
        if not decomp.holds:
            return CheckResult(
                "mechanism-structure", False,
                f"decomposition deviation {decomp.max_deviation:.3e} != 0",
            )
    return CheckResult("mechanism-structure", True, f"{n_instances} instances")


def classical_bounds_suite(dims) -> CheckResult:
    for d in dims:
        loc = classical_locations(d)
        if abs(loc.omega[0] - 2.0 * np.sqrt(d)) > 1e-9:
            return CheckResult(
                "classical-gap-bounds", False, f"top location off at d={d}"
            )
        report = classical_gap_bounds_check(loc)
        if not report.holds:
            return CheckResult(
                "classical-gap-bounds", False,
                f"d={d}: indices {report.violations} outside the envelope",
            )
    return CheckResult("classical-gap-bounds", True, f"dims {tuple(dims)}")


def run_verify(quick: bool = False, seed: int = 0) -> list[CheckResult]:
    if quick:
        return [
            weyl_suite(100, seed),
            davis_kahan_suite(50, seed),
            mechanism_structure_suite(50, seed),
            classical_bounds_suite((8, 16, 32)),
        ]
    return [
        weyl_suite(1000, seed),
        davis_kahan_suite(200, seed),
        mechanism_structure_suite(500, seed),
        classical_bounds_suite((8, 16, 32, 64, 128)),
    ]
