"""Eigenvalue diffusion with pairwise repulsion (Dyson dynamics).

Integrates the ordered-eigenvalue SDE

    d gamma_i = dB_i + 2 beta sum_{j != i} dt / (gamma_i - gamma_j)

with Euler-Maruyama and recursive step halving near small gaps.  The
diagonal increments dB_i carry variance 4 dt and the repulsion coefficient
is 2 beta, which makes the time-t state of the integrator agree in law
with the eigenvalues of M + (noisy matrix at time t) for beta = 2
(Hermitian complex noise) and beta = 1 (real symmetric noise): for d = 2
the gap is then an exact Bessel(3) process, matching the matrix model.

Within a refined step the full-step Brownian increment is allocated
linearly in time; the noise is additive, so this changes only the drift
resolution, and coupled trajectories sharing increments stay coupled at
every refinement level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import HermitianMatrix, WeylChamberVector
from .mechanisms import sample_complex_perturbation, sample_real_perturbation
from .rng import substream

DEFAULT_SUBSTEP_THRESHOLD = 0.25
DEFAULT_MAX_SUBSTEP_DEPTH = 20
RECORD_TARGET = 1000  # recorded states per trajectory, plus the final one
TIE_JITTER_FACTOR = 1e-2  # tie-breaking offset is this times sqrt(dt)


class IntegrationError(RuntimeError):
    """Ordering broke down at the maximum refinement depth."""

    def __init__(self, message: str, time: float, worst_gap: float):
        super().__init__(message)
        self.time = time
        self.worst_gap = worst_gap


@dataclass(frozen=True)
class DysonConfig:
    dim: int
    beta: int
    dt: float
    t_end: float
    substep_gap_threshold: float = DEFAULT_SUBSTEP_THRESHOLD
    max_substep_depth: int = DEFAULT_MAX_SUBSTEP_DEPTH

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if self.beta not in (1, 2):
            raise ValueError(f"beta must be 1 or 2, got {self.beta}")
        if not 0 < self.dt <= self.t_end:
            raise ValueError("need 0 < dt <= t_end")
        if not self.substep_gap_threshold > 0:
            raise ValueError("substep_gap_threshold must be positive")
        if self.max_substep_depth < 1:
            raise ValueError("max_substep_depth must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def record_every(self) -> int:
        return max(1, math.ceil(self.n_steps / RECORD_TARGET))


@dataclass(frozen=True)
class DysonTrajectory:
    """States recorded on a uniform time grid, each strictly decreasing."""

    times: np.ndarray
    states: np.ndarray  # (len(times), dim)
    config: DysonConfig
    seed: tuple[int, ...] | None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or s.shape != (t.size, self.config.dim):
            raise ValueError("times and states shapes are inconsistent")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and strictly increase")
        if np.any(np.diff(s, axis=1) >= 0):
            raise ValueError("every recorded state must be strictly decreasing")
        t = t.copy()
        t.setflags(write=False)
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def state(self, idx: int) -> WeylChamberVector:
        return WeylChamberVector(self.states[idx])

    def terminal(self) -> WeylChamberVector:
        return WeylChamberVector(self.states[-1])

    def gaps(self) -> np.ndarray:
        """(len(times), dim-1) array of adjacent gaps, all positive."""
        return -np.diff(self.states, axis=1)


@dataclass(frozen=True)
class CoupledPair:
    """Two trajectories driven by identical diagonal increments."""

    gamma: DysonTrajectory
    xi: DysonTrajectory

    def __post_init__(self):
        if self.gamma.config != self.xi.config:
            raise ValueError("coupled trajectories must share a config")
        if not np.array_equal(self.gamma.times, self.xi.times):
            raise ValueError("coupled trajectories must share the time grid")


@dataclass(frozen=True)
class ViolationReport:
    """Count of recorded (time, index) points where the xi gap exceeded the
    gamma gap by more than the tolerance."""

    violations: int
    comparisons: int
    worst_excess: float
    fraction: float


@dataclass(frozen=True)
class KsReport:
    """Two-sample Kolmogorov-Smirnov distance between gap samples."""

    d_stat: float
    n_first: int
    n_second: int


def repulsion_drift(states: np.ndarray, beta: int) -> np.ndarray:
    """Drift 2 beta sum_{j != i} 1/(state_i - state_j), rows independent.

    ``states`` has shape (m, d); rows must be strictly decreasing.
    """
    m, d = states.shape
    if d == 1:
        return np.zeros((m, 1))
    diff = states[:, :, None] - states[:, None, :]
    idx = np.arange(d)
    diff[:, idx, idx] = 1.0  # placeholder; excluded from the sum below
    inv = 1.0 / diff
    inv[:, idx, idx] = 0.0
    return 2.0 * beta * inv.sum(axis=2)


def _advance(
    states: np.ndarray,
    dw_full: np.ndarray,
    h: float,
    dt_full: float,
    depth: int,
    beta: int,
    threshold: float,
    max_depth: int,
    t_base: float,
) -> np.ndarray:
    """Advance every row by h, refining rows whose drift step is too large
    relative to their smallest gap (or whose update breaks ordering)."""
    drift = repulsion_drift(states, beta)
    cand = states + dw_full * (h / dt_full) + drift * h
    if states.shape[1] > 1:
        min_gap = (-np.diff(states, axis=1)).min(axis=1)
        too_stiff = np.abs(drift).max(axis=1) * h > threshold * min_gap
        ordered = np.all(np.diff(cand, axis=1) < 0, axis=1)
    else:
        too_stiff = np.zeros(states.shape[0], dtype=bool)
        ordered = np.ones(states.shape[0], dtype=bool)
    if depth >= max_depth:
        if not np.all(ordered):
            bad = ~ordered
            worst = float(np.diff(cand[bad], axis=1).max())
            raise IntegrationError(
                f"eigenvalue ordering violated near t = {t_base:.6g} after "
                f"{max_depth} halvings (worst inverted gap {worst:.3e})",
                time=t_base,
                worst_gap=worst,
            )
        return cand
    refine = too_stiff | ~ordered
    if not np.any(refine):
        return cand
    out = cand
    rows = np.where(refine)[0]
    sub = states[rows]
    dw_sub = dw_full[rows]
    half = _advance(sub, dw_sub, h / 2, dt_full, depth + 1, beta, threshold,
                    max_depth, t_base)
    full = _advance(half, dw_sub, h / 2, dt_full, depth + 1, beta, threshold,
                    max_depth, t_base + h / 2)
    out[rows] = full
    return out


def dyson_step(
    state,
    dw: np.ndarray,
    dt: float,
    beta: int,
    *,
    substep_gap_threshold: float = DEFAULT_SUBSTEP_THRESHOLD,
    max_substep_depth: int = DEFAULT_MAX_SUBSTEP_DEPTH,
    t_base: float = 0.0,
) -> WeylChamberVector:
    """One Euler-Maruyama step of length dt with increment vector dw.

    ``dw`` is the full-step diagonal Brownian increment (variance 4 dt per
    coordinate under the matrix-consistent convention; callers choose).
    Sub-stepping halves the step while any |drift|*dt exceeds
    ``substep_gap_threshold`` times the smallest adjacent gap.
    """
    x = state.coords if isinstance(state, WeylChamberVector) else np.asarray(state, float)
    if x.ndim != 1:
        raise ValueError("state must be a vector")
    if x.size > 1 and np.any(np.diff(x) >= 0):
        raise ValueError("state must be strictly decreasing")
    dw = np.asarray(dw, dtype=float)
    if dw.shape != x.shape:
        raise ValueError("increment shape must match the state")
    out = _advance(
        x[None, :].copy(), dw[None, :], dt, dt, 0, beta,
        substep_gap_threshold, max_substep_depth, t_base,
    )
    return WeylChamberVector(out[0])


def _prepare_initial(gamma0, dt: float) -> np.ndarray:
    """Return a strictly decreasing start; break ties by subtracting
    i * (tie jitter) from coordinate i."""
    x = np.asarray(
        gamma0.coords if isinstance(gamma0, WeylChamberVector) else gamma0,
        dtype=float,
    ).copy()
    if x.ndim != 1:
        raise ValueError("initial condition must be a vector")
    if np.any(np.diff(x) > 0):
        raise ValueError("initial condition must be non-increasing")
    if x.size > 1 and np.any(np.diff(x) == 0):
        x = x - np.arange(x.size) * (TIE_JITTER_FACTOR * math.sqrt(dt))
    return x


def _resolve_rng(rng) -> tuple[np.random.Generator, tuple[int, ...] | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    if isinstance(rng, (int, np.integer)):
        path = (int(rng),)
    else:
        path = tuple(int(p) for p in rng)
    return substream(*path), path


def _run_batch(
    starts: np.ndarray,
    config: DysonConfig,
    gens: list[np.random.Generator],
    shared_increments: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a batch of rows on the uniform grid, recording snapshots.

    With ``shared_increments`` the batch must hold pairs stacked as
    [gamma rows; xi rows] and each xi row reuses its gamma row's draws.
    Returns (times, states) with states of shape (n_records, rows, d).
    """
    n_steps = config.n_steps
    every = config.record_every
    record_idx = [0] + [s for s in range(every, n_steps + 1, every)]
    if record_idx[-1] != n_steps:
        record_idx.append(n_steps)
    rows, d = starts.shape
    noise_rows = rows // 2 if shared_increments else rows
    sigma = 2.0 * math.sqrt(config.dt)
    states = starts.copy()
    recorded = np.empty((len(record_idx), rows, d))
    times = np.empty(len(record_idx))
    rec = 0
    if record_idx[0] == 0:
        recorded[0] = states
        times[0] = 0.0
        rec = 1
    for step in range(1, n_steps + 1):
        if len(gens) == 1:
            dw = sigma * gens[0].standard_normal((noise_rows, d))
        else:
            dw = np.empty((noise_rows, d))
            for r, g in enumerate(gens):
                dw[r] = sigma * g.standard_normal(d)
        if shared_increments:
            dw = np.vstack([dw, dw])
        states = _advance(
            states, dw, config.dt, config.dt, 0, config.beta,
            config.substep_gap_threshold, config.max_substep_depth,
            (step - 1) * config.dt,
        )
        if rec < len(record_idx) and step == record_idx[rec]:
            recorded[rec] = states
            times[rec] = step * config.dt
            rec += 1
    return times, recorded


def simulate(gamma0, config: DysonConfig, rng) -> DysonTrajectory:
    """Integrate one trajectory from ``gamma0`` on the uniform grid.

    ``rng`` is a numpy Generator or an integer seed / seed path (recorded
    in the trajectory when given).
    """
    gen, seed = _resolve_rng(rng)
    start = _prepare_initial(gamma0, config.dt)
    if start.size != config.dim:
        raise ValueError("initial condition length must match config.dim")
    times, recorded = _run_batch(start[None, :], config, [gen], False)
    return DysonTrajectory(times=times, states=recorded[:, 0, :], config=config,
                           seed=seed)


def simulate_coupled(gamma0, xi0, config: DysonConfig, rng) -> CoupledPair:
    """Integrate two trajectories driven by identical increments."""
    pairs = simulate_coupled_batch([gamma0], [xi0], config, [rng])
    return pairs[0]


def simulate_coupled_batch(
    gamma0s, xi0s, config: DysonConfig, rngs
) -> list[CoupledPair]:
    """Integrate many coupled pairs at once.

    Each pair has its own increment stream (one entry of ``rngs``), shared
    between its two trajectories, so a pair re-simulated alone from the
    same seed reproduces the batch result bitwise.
    """
    if len(gamma0s) != len(xi0s) or len(gamma0s) != len(rngs):
        raise ValueError("gamma0s, xi0s, and rngs must have equal length")
    n = len(gamma0s)
    gens: list[np.random.Generator] = []
    seeds: list[tuple[int, ...] | None] = []
    for r in rngs:
        g, s = _resolve_rng(r)
        gens.append(g)
        seeds.append(s)
    g_starts = np.stack([_prepare_initial(g0, config.dt) for g0 in gamma0s])
    x_starts = np.stack([_prepare_initial(x0, config.dt) for x0 in xi0s])
    if g_starts.shape[1] != config.dim:
        raise ValueError("initial condition length must match config.dim")
    stacked = np.vstack([g_starts, x_starts])
    times, recorded = _run_batch(stacked, config, gens, True)
    pairs = []
    for p in range(n):
        gamma = DysonTrajectory(times=times, states=recorded[:, p, :],
                                config=config, seed=seeds[p])
        xi = DysonTrajectory(times=times, states=recorded[:, n + p, :],
                             config=config, seed=seeds[p])
        pairs.append(CoupledPair(gamma=gamma, xi=xi))
    return pairs


def simulate_terminal_batch(
    gamma0, config: DysonConfig, n: int, rng
) -> np.ndarray:
    """Terminal states of n independent trajectories from a common start.

    Increments for the whole batch come from one stream, so the result is
    reproducible per (seed, n) rather than per row.  Returns (n, d).
    """
    gen, _ = _resolve_rng(rng)
    start = _prepare_initial(gamma0, config.dt)
    starts = np.tile(start, (n, 1))
    _, recorded = _run_batch(starts, config, [gen], False)
    return recorded[-1]


def matrix_process_eigs(m: HermitianMatrix, t: float, beta: int, rng) -> WeylChamberVector:
    """Eigenvalues of M plus the time-t noisy matrix; the exact-in-law
    reference for the SDE at time t."""
    if not t > 0:
        raise ValueError("t must be positive")
    gen, _ = _resolve_rng(rng)
    if beta == 2:
        pert = sample_complex_perturbation(m.dim, gen).entries
    elif beta == 1:
        pert = sample_real_perturbation(m.dim, gen).entries.astype(complex)
    else:
        raise ValueError(f"beta must be 1 or 2, got {beta}")
    vals = np.linalg.eigvalsh(m.entries + math.sqrt(t) * pert)
    return WeylChamberVector(vals[::-1])


def _matrix_gap_batch(
    d: int, t: float, beta: int, n: int, rng: np.random.Generator, gap_index: int
) -> np.ndarray:
    """Middle-gap draws from n independent noisy-matrix eigensolves."""
    out = np.empty(n)
    chunk = 2048
    done = 0
    while done < n:
        m = min(chunk, n - done)
        if beta == 2:
            w1 = rng.standard_normal((m, d, d))
            w2 = rng.standard_normal((m, d, d))
            g = w1 + 1j * w2
            mats = math.sqrt(t) * (g + g.conj().transpose(0, 2, 1))
        else:
            w1 = rng.standard_normal((m, d, d))
            mats = math.sqrt(t) * (w1 + w1.transpose(0, 2, 1))
        vals = np.linalg.eigvalsh(mats)[:, ::-1]
        out[done : done + m] = vals[:, gap_index - 1] - vals[:, gap_index]
        done += m
    return out


def gap_order_violations(pair: CoupledPair, tol: float) -> ViolationReport:
    """Count recorded (time, index) points where a xi gap exceeds the
    corresponding gamma gap by more than tol."""
    g_gaps = pair.gamma.gaps()
    x_gaps = pair.xi.gaps()
    excess = x_gaps - g_gaps
    violations = int(np.sum(excess > tol))
    comparisons = excess.size
    return ViolationReport(
        violations=violations,
        comparisons=comparisons,
        worst_excess=float(excess.max()) if comparisons else 0.0,
        fraction=violations / comparisons if comparisons else 0.0,
    )


def ks_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic max |F_x - F_y|."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / x.size
    cdf_y = np.searchsorted(y, pooled, side="right") / y.size
    return float(np.abs(cdf_x - cdf_y).max())


def equilibrium_consistency(
    d: int,
    t: float,
    n: int,
    beta: int,
    rng,
    *,
    dt: float = 1e-4,
) -> KsReport:
    """KS distance between the SDE middle gap at time t (zero start) and
    the same gap from direct noisy-matrix eigensolves."""
    if not t > 0:
        raise ValueError("t must be positive")
    if n < 100:
        raise ValueError("need n >= 100 for a meaningful comparison")
    gen, _ = _resolve_rng(rng)
    config = DysonConfig(dim=d, beta=beta, dt=dt, t_end=t)
    mid = d // 2  # 1-based gap index
    terminal = simulate_terminal_batch(np.zeros(d), config, n, gen)
    sde_gaps = terminal[:, mid - 1] - terminal[:, mid]
    matrix_gaps = _matrix_gap_batch(d, t, beta, n, gen, mid)
    return KsReport(d_stat=ks_distance(sde_gaps, matrix_gaps),
                    n_first=n, n_second=n)
