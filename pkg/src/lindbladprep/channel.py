"""Circuit-level simulation of the single-ancilla dissipative scheme.

One evolution step applies the 2N x 2N unitary ``W`` (``r`` times) to
``|0> x psi``, discards/measures the ancilla, and optionally finishes with
the coherent conjugation ``e^{-iH tau}``.  ``W`` is the symmetric
(second-order) ordered product over the time-quadrature grid,

    W = [prod_{l=-M..M} Atilde_l (I x e^{+iH tau_s})]
        [prod_{l=M..-M} (I x e^{-iH tau_s}) Atilde_l],

where ``Atilde_l = exp(-i (x/2) sigma_l x A)`` with
``sigma_l = w_l (sigma_x Re f(s_l) + sigma_y Im f(s_l))`` and ``x`` the
unitary time argument.  The back-and-forth Heisenberg frames cancel
telescopically, which is why only short ``tau_s`` evolutions remain; the
leftover frame factors ``I x e^{-/+ i H (M tau_s)}`` cancel between
consecutive steps and are dropped.

Cost accounting: every ``Atilde_l`` counts as one controlled-A gate and
every ``e^{+/- i H t}`` factor contributes ``|t|`` of Hamiltonian
simulation time, so one step costs ``r * 2 * (2M + 1)`` gates and
``r * 2 * (2M + 1) * tau_s`` (+ ``tau`` when coherent) of time.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .filters import FilterParams, f_time, quadrature_grid
from .linalg import (
    DensityMatrix,
    HermitianOperator,
    SpectralDecomposition,
    evolution_unitary,
    hermitian_eig,
    max_abs,
)
from .models import ModelSpec, coupling_operator

__all__ = [
    "ChannelConfig",
    "CostLedger",
    "SimulationRecord",
    "ChannelError",
    "build_w",
    "build_w_naive",
    "step_cost",
    "channel_step_density",
    "trajectory_step",
    "run_simulation",
]

WORKERS_ENV = "LINDBLADPREP_WORKERS"


class ChannelError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChannelConfig:
    """Stepping scheme for one run.

    ``mode`` is documentation of the regime: ``continuous`` means a small
    step with ``r = 1``; ``discrete`` allows a large step refined by ``r``
    unitary segments ``W(sqrt(tau)/r)`` per step.  ``total_time / tau``
    must be an integer step count.
    """

    tau: float
    total_time: float
    mode: str = "continuous"
    r: int = 1
    include_coherent: bool = True
    backend: str = "trajectory"
    reps: int = 1
    seed: int = 0
    initial_state: str = "highest_excited"
    record_stride: int = 1

    def __post_init__(self):
        if self.mode not in ("continuous", "discrete"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.backend not in ("trajectory", "density"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.tau <= 0 or self.total_time <= 0:
            raise ValueError("tau and total_time must be positive")
        if self.r < 1:
            raise ValueError("segment count r must be >= 1")
        steps = self.total_time / self.tau
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("total_time must be an integer multiple of tau")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if not (
            self.initial_state in ("highest_excited", "ground")
            or self.initial_state.startswith("eigenstate:")
        ):
            raise ValueError(f"unknown initial_state {self.initial_state!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.tau))

    @property
    def tau_eff(self) -> float:
        """Squared unitary argument of one segment: (sqrt(tau)/r)^2."""
        return self.tau / self.r**2


@dataclass
class CostLedger:
    """Accumulated circuit cost; both counters only ever increase."""

    hamiltonian_time: float = 0.0
    controlled_a_count: int = 0

    def add(self, other: "CostLedger") -> None:
        if other.hamiltonian_time < 0 or other.controlled_a_count < 0:
            raise ValueError("ledger increments must be nonnegative")
        self.hamiltonian_time += other.hamiltonian_time
        self.controlled_a_count += other.controlled_a_count


def step_cost(p: FilterParams, cfg: ChannelConfig) -> CostLedger:
    """Analytic cost of one evolution step."""
    factors = 2 * (2 * p.m_half + 1)
    return CostLedger(
        hamiltonian_time=cfg.r * factors * p.tau_s
        + (cfg.tau if cfg.include_coherent else 0.0),
        controlled_a_count=cfg.r * factors,
    )


@dataclass
class SimulationRecord:
    """Per-step time series of a run (means and standard errors over reps)."""

    steps: np.ndarray
    times: np.ndarray
    h_time: np.ndarray
    a_gates: np.ndarray
    energy_mean: np.ndarray
    energy_se: np.ndarray
    overlap_mean: np.ndarray
    overlap_se: np.ndarray
    meta: dict = field(default_factory=dict)

    COLUMNS = (
        "step",
        "time",
        "h_time",
        "a_gates",
        "energy_mean",
        "energy_se",
        "overlap_mean",
        "overlap_se",
    )

    def rows(self):
        for i in range(self.steps.size):
            yield (
                int(self.steps[i]),
                float(self.times[i]),
                float(self.h_time[i]),
                int(self.a_gates[i]),
                float(self.energy_mean[i]),
                float(self.energy_se[i]),
                float(self.overlap_mean[i]),
                float(self.overlap_se[i]),
            )

    @property
    def final_energy(self) -> float:
        return float(self.energy_mean[-1])

    @property
    def final_overlap(self) -> float:
        return float(self.overlap_mean[-1])

    def h_time_at_overlap(self, threshold: float) -> float | None:
        """Hamiltonian time at the first recorded step with overlap >= threshold."""
        hits = np.nonzero(self.overlap_mean >= threshold)[0]
        if hits.size == 0:
            return None
        return float(self.h_time[hits[0]])


def _atilde_blocks(
    a_spec: SpectralDecomposition, phi: float, theta: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blocks of exp(-i phi P(theta) x A) with P = cos(theta) X + sin(theta) Y.

    Returns (C, off01, off10) where the full matrix is
    [[C, off01], [off10, C]]; C = cos(phi A), off01 = -i e^{-i theta}
    sin(phi A), off10 = -i e^{i theta} sin(phi A).
    """
    v = a_spec.eigenvectors
    cos_d = np.cos(phi * a_spec.eigenvalues)
    sin_d = np.sin(phi * a_spec.eigenvalues)
    c = (v * cos_d) @ v.conj().T
    s = (v * sin_d) @ v.conj().T
    return c, -1j * np.exp(-1j * theta) * s, -1j * np.exp(1j * theta) * s


def build_w(
    spec: SpectralDecomposition,
    a: HermitianOperator,
    p: FilterParams,
    tau_eff: float,
    *,
    a_spec: SpectralDecomposition | None = None,
    check_unitary: bool = True,
) -> np.ndarray:
    """Second-order ordered-product unitary approximating
    ``exp(-i sqrt(tau_eff) Ktilde_s)`` up to the cancelled outer frames.

    ``tau_eff`` is the per-segment dissipative weight: ``tau`` for a single
    segment, ``tau / r^2`` when a step of size ``tau`` is split into ``r``
    segments (the unitary argument multiplies, so ``r`` segments of
    ``sqrt(tau)/r`` compose to ``sqrt(tau)``).
    """
    if tau_eff <= 0:
        raise ValueError("tau_eff must be positive")
    if spec.dim != a.dim:
        raise ValueError("dimension mismatch between spectrum and coupling")
    x = np.sqrt(tau_eff)
    if a_spec is None:
        a_spec = hermitian_eig(a)
    nodes, weights = quadrature_grid(p)
    fvals = f_time(nodes, p)
    u_fwd = evolution_unitary(spec, -p.tau_s)  # e^{+iH tau_s}
    u_bwd = u_fwd.conj().T  # e^{-iH tau_s}
    n = spec.dim

    factors_right = []
    factors_left = []
    for f_l, w_l in zip(fvals, weights):
        phi = 0.5 * x * w_l * abs(f_l)
        theta = float(np.angle(f_l)) if f_l != 0 else 0.0
        c, o01, o10 = _atilde_blocks(a_spec, phi, theta)
        # fold the tau_s frame hop into the node factor before assembling
        factors_right.append(np.block([[c @ u_fwd, o01 @ u_fwd], [o10 @ u_fwd, c @ u_fwd]]))
        factors_left.append(np.block([[u_bwd @ c, u_bwd @ o01], [u_bwd @ o10, u_bwd @ c]]))

    w = np.eye(2 * n, dtype=complex)
    for fac in factors_right:  # l = -M .. M
        w = w @ fac
    for fac in reversed(factors_left):  # l = M .. -M
        w = w @ fac
    if check_unitary:
        defect = max_abs(w.conj().T @ w - np.eye(2 * n))
        if defect > 1e-10:
            raise ChannelError(f"W lost unitarity: max|W^dag W - I| = {defect:.3e}")
    return w


def build_w_naive(
    spec: SpectralDecomposition,
    a: HermitianOperator,
    p: FilterParams,
    tau_eff: float,
) -> np.ndarray:
    """Pre-cancellation ordered product, kept as an independent reference.

    Every node carries its full Heisenberg frame
    ``(I x e^{+iH s_l}) Atilde_l (I x e^{-iH s_l})``; the result equals
    ``(I x e^{-iHG}) W (I x e^{+iHG})`` with ``G`` the grid radius.
    """
    x = np.sqrt(tau_eff)
    a_spec = hermitian_eig(a)
    nodes, weights = quadrature_grid(p)
    fvals = f_time(nodes, p)
    n = spec.dim

    def frame(t: float) -> np.ndarray:
        return np.kron(np.eye(2), evolution_unitary(spec, t))

    conjugated = []
    for s_l, f_l, w_l in zip(nodes, fvals, weights):
        phi = 0.5 * x * w_l * abs(f_l)
        theta = float(np.angle(f_l)) if f_l != 0 else 0.0
        c, o01, o10 = _atilde_blocks(a_spec, phi, theta)
        atilde = np.block([[c, o01], [o10, c]])
        conjugated.append(frame(-s_l) @ atilde @ frame(s_l))

    out = np.eye(2 * n, dtype=complex)
    for mat in conjugated:  # right-ordered
        out = out @ mat
    for mat in reversed(conjugated):  # left-ordered
        out = out @ mat
    return out


def _kraus_pair(w: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Kraus operators of the ancilla-discarding channel built from W^r."""
    phi = np.linalg.matrix_power(w, r)
    n = w.shape[0] // 2
    return phi[:n, :n], phi[n:, :n]


def channel_step_density(
    rho: DensityMatrix,
    w: np.ndarray,
    cfg: ChannelConfig,
    p: FilterParams,
    u_coherent: np.ndarray | None = None,
) -> tuple[DensityMatrix, CostLedger]:
    """One step of the density-matrix backend.

    ``u_coherent`` must be ``e^{-iH tau}`` when the coherent part is on.
    """
    m0, m1 = _kraus_pair(w, cfg.r)
    out = m0 @ rho.matrix @ m0.conj().T + m1 @ rho.matrix @ m1.conj().T
    if cfg.include_coherent:
        if u_coherent is None:
            raise ChannelError("coherent step requested but no e^{-iH tau} supplied")
        out = u_coherent @ out @ u_coherent.conj().T
    out = (out + out.conj().T) / 2
    tr = float(np.trace(out).real)
    if abs(tr - 1.0) > 1e-8:
        raise ChannelError(f"channel step trace drifted to {tr}")
    return DensityMatrix(out, check_positivity=False), step_cost(p, cfg)


def trajectory_step(
    psi: np.ndarray,
    w: np.ndarray,
    cfg: ChannelConfig,
    p: FilterParams,
    u_coherent: np.ndarray | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int, CostLedger]:
    """One stochastic step: apply W^r to |0> x psi, measure the ancilla in
    the computational basis, discard the outcome, reset, then (optionally)
    apply e^{-iH tau}.

    Returns (new state, measured bit, cost delta).  The bit is recorded for
    diagnostics only; the scheme never conditions on it.
    """
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-9:
        raise ChannelError(f"trajectory state norm {nrm} is not 1")
    n = psi.size
    branch0, branch1 = psi.copy(), np.zeros_like(psi)
    for _ in range(cfg.r):
        top = w[:n, :n] @ branch0 + w[:n, n:] @ branch1
        bot = w[n:, :n] @ branch0 + w[n:, n:] @ branch1
        branch0, branch1 = top, bot
    p1 = float(np.vdot(branch1, branch1).real)
    outcome = 1 if rng.random() < p1 else 0
    collapsed = branch1 if outcome == 1 else branch0
    weight = np.linalg.norm(collapsed)
    if weight < 1e-12:
        raise ChannelError(
            f"measurement branch {outcome} has vanishing probability; trajectory aborted"
        )
    out = collapsed / weight
    if cfg.include_coherent:
        if u_coherent is None:
            raise ChannelError("coherent step requested but no e^{-iH tau} supplied")
        out = u_coherent @ out
    return out, outcome, step_cost(p, cfg)


def _initial_vector(spec: SpectralDecomposition, which: str) -> np.ndarray:
    if which == "highest_excited":
        return spec.eigenvectors[:, -1].copy()
    if which == "ground":
        return spec.eigenvectors[:, 0].copy()
    idx = int(which.split(":", 1)[1])
    if not 0 <= idx < spec.dim:
        raise ValueError(f"eigenstate index {idx} out of range")
    return spec.eigenvectors[:, idx].copy()


def _record_steps(n_steps: int, stride: int) -> np.ndarray:
    steps = list(range(0, n_steps + 1, stride))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return np.asarray(steps, dtype=int)


def resolve_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is not None:
        count = int(raw)
        if count < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return count
    return os.cpu_count() or 1


# Worker-process context for the trajectory pool (set by the initializer).
_POOL_CTX: dict = {}


def _pool_init(ctx: dict) -> None:
    _POOL_CTX.update(ctx)


def _pool_trajectory(traj_idx: int) -> tuple[np.ndarray, np.ndarray]:
    c = _POOL_CTX
    return _run_trajectory(
        traj_idx,
        c["w"],
        c["cfg"],
        c["params"],
        c["u_coh"],
        c["psi0"],
        c["h_matrix"],
        c["ground_proj"],
        c["record_steps"],
    )


def _run_trajectory(
    traj_idx: int,
    w: np.ndarray,
    cfg: ChannelConfig,
    p: FilterParams,
    u_coh: np.ndarray | None,
    psi0: np.ndarray,
    h_matrix: np.ndarray,
    ground_proj: np.ndarray,
    record_steps: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One trajectory; RNG stream depends only on (seed, traj_idx)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, traj_idx]))
    psi = psi0.copy()
    record_set = set(int(s) for s in record_steps)
    energies = np.empty(record_steps.size)
    overlaps = np.empty(record_steps.size)
    cursor = 0
    if 0 in record_set:
        energies[cursor] = np.vdot(psi, h_matrix @ psi).real
        overlaps[cursor] = np.vdot(psi, ground_proj @ psi).real
        cursor += 1
    for step in range(1, cfg.n_steps + 1):
        psi, _, _ = trajectory_step(psi, w, cfg, p, u_coh, rng)
        if step in record_set:
            energies[cursor] = np.vdot(psi, h_matrix @ psi).real
            overlaps[cursor] = np.vdot(psi, ground_proj @ psi).real
            cursor += 1
    return energies, overlaps


def run_simulation(
    model: ModelSpec | tuple[HermitianOperator, HermitianOperator],
    cfg: ChannelConfig,
    p: FilterParams | None = None,
    *,
    workers: int | None = None,
) -> SimulationRecord:
    """Full time series for one configuration.

    ``model`` is either a :class:`ModelSpec` or an explicit
    ``(hamiltonian, coupling)`` pair.  When ``p`` is omitted the parameter
    rule is applied to the computed spectral norm and gap.  Results are
    deterministic given ``(cfg.seed, cfg.reps)`` and independent of the
    worker count.
    """
    if isinstance(model, ModelSpec):
        h = model.hamiltonian()
        a = coupling_operator(model)
    else:
        h, a = model
    spec = hermitian_eig(h)
    if spec.gap <= 1e-9:
        warnings.warn(
            "ground space is (near-)degenerate (gap <= 1e-9); overlap is "
            "measured against the full ground-space projector",
            stacklevel=2,
        )
    if p is None:
        from .filters import default_params

        p = default_params(spec.spectral_norm, spec.gap)

    w = build_w(spec, a, p, cfg.tau_eff)
    u_coh = evolution_unitary(spec, cfg.tau) if cfg.include_coherent else None
    ground_proj = spec.ground_projector()
    record_steps = _record_steps(cfg.n_steps, cfg.record_stride)
    per_step = step_cost(p, cfg)
    h_time = record_steps * per_step.hamiltonian_time
    a_gates = record_steps * per_step.controlled_a_count

    if cfg.backend == "density":
        rho = DensityMatrix.pure(_initial_vector(spec, cfg.initial_state))
        record_set = set(int(s) for s in record_steps)
        energies = np.empty(record_steps.size)
        overlaps = np.empty(record_steps.size)
        cursor = 0
        if 0 in record_set:
            energies[cursor] = float(np.trace(h.matrix @ rho.matrix).real)
            overlaps[cursor] = float(np.trace(ground_proj @ rho.matrix).real)
            cursor += 1
        for step in range(1, cfg.n_steps + 1):
            rho, _ = channel_step_density(rho, w, cfg, p, u_coh)
            if step in record_set:
                energies[cursor] = float(np.trace(h.matrix @ rho.matrix).real)
                overlaps[cursor] = float(np.trace(ground_proj @ rho.matrix).real)
                cursor += 1
        e_mean, e_se = energies, np.zeros_like(energies)
        o_mean, o_se = overlaps, np.zeros_like(overlaps)
    else:
        psi0 = _initial_vector(spec, cfg.initial_state)
        n_workers = resolve_workers() if workers is None else workers
        n_workers = max(1, min(n_workers, cfg.reps))
        args = (w, cfg, p, u_coh, psi0, h.matrix, ground_proj, record_steps)
        if n_workers == 1:
            results = [_run_trajectory(i, *args) for i in range(cfg.reps)]
        else:
            ctx = {
                "w": w,
                "cfg": cfg,
                "params": p,
                "u_coh": u_coh,
                "psi0": psi0,
                "h_matrix": h.matrix,
                "ground_proj": ground_proj,
                "record_steps": record_steps,
            }
            with ProcessPoolExecutor(
                max_workers=n_workers, initializer=_pool_init, initargs=(ctx,)
            ) as pool:
                results = list(pool.map(_pool_trajectory, range(cfg.reps), chunksize=8))
        e_stack = np.stack([r[0] for r in results])
        o_stack = np.stack([r[1] for r in results])
        e_mean = e_stack.mean(axis=0)
        o_mean = o_stack.mean(axis=0)
        if cfg.reps > 1:
            e_se = e_stack.std(axis=0, ddof=1) / np.sqrt(cfg.reps)
            o_se = o_stack.std(axis=0, ddof=1) / np.sqrt(cfg.reps)
        else:
            e_se = np.zeros_like(e_mean)
            o_se = np.zeros_like(o_mean)

    if np.any(o_mean < -1e-9) or np.any(o_mean > 1 + 1e-9):
        raise ChannelError("recorded overlap left [0, 1]")
    lo, hi = spec.eigenvalues[0], spec.eigenvalues[-1]
    if np.any(e_mean < lo - 1e-6) or np.any(e_mean > hi + 1e-6):
        raise ChannelError("recorded energy left the spectral range")

    meta = {
        "filter": {
            "a": p.a,
            "delta_a": p.delta_a,
            "b": p.b,
            "delta_b": p.delta_b,
            "s_radius": p.s_radius,
            "tau_s": p.tau_s,
            "m_half": p.m_half,
            "grid_radius": p.grid_radius,
            "clamp_nonnegative": p.clamp_nonnegative,
        },
        "channel": {
            "tau": cfg.tau,
            "total_time": cfg.total_time,
            "mode": cfg.mode,
            "r": cfg.r,
            "include_coherent": cfg.include_coherent,
            "backend": cfg.backend,
            "reps": cfg.reps,
            "seed": cfg.seed,
            "initial_state": cfg.initial_state,
            "record_stride": cfg.record_stride,
            "n_steps": cfg.n_steps,
        },
        "spectrum": {
            "ground_energy": float(spec.eigenvalues[0]),
            "max_energy": float(spec.eigenvalues[-1]),
            "gap": spec.gap,
            "spectral_norm": spec.spectral_norm,
            "dim": spec.dim,
        },
    }
    return SimulationRecord(
        steps=record_steps,
        times=record_steps * cfg.tau,
        h_time=h_time,
        a_gates=a_gates,
        energy_mean=e_mean,
        energy_se=e_se,
        overlap_mean=o_mean,
        overlap_se=o_se,
        meta=meta,
    )
