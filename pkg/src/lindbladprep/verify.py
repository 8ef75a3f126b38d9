"""Self-verification suite behind the ``verify`` CLI subcommand.

``fast`` runs oracle checks on systems of dimension <= 16 in well under a
minute; ``full`` adds the benchmark convergence runs and scaling-law fits.
Every check returns a pass flag and a one-line numeric detail, collected
into a machine-readable report.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .channel import ChannelConfig, build_w, build_w_naive, channel_step_density, run_simulation
from .filters import default_params, f_hat, f_time, quadrature_grid
from .jump import dilate, exact_jump, ground_residual, quadrature_jump
from .linalg import (
    DensityMatrix,
    HermitianOperator,
    evolution_unitary,
    hermitian_eig,
    trace_norm,
)
from .models import ModelSpec, coupling_operator
from .randomcoupling import (
    RandomCouplingSpec,
    concentration_experiment,
    ergodicity_experiment,
    evolve_populations,
    synthetic_spectrum,
    transition_matrix,
)
from .reference import (
    LindbladSystem,
    evolve_ode,
    exact_dilated_step,
    superoperator_expm_step,
)

__all__ = ["CheckResult", "run_verify", "quadrature_convergence_check"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _tfim2_setup(clamp: bool = False):
    model = ModelSpec("tfim", 2, tfim_g=1.2)
    h = model.hamiltonian()
    spec = hermitian_eig(h)
    p = default_params(spec.spectral_norm, spec.gap, clamp=clamp)
    return h, spec, coupling_operator(model), p


def _random_density(rng, dim) -> DensityMatrix:
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = x @ x.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def check_eig_reconstruction():
    rng = np.random.default_rng(0)
    worst = 0.0
    for dim in (2, 5, 11, 16):
        x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        h = HermitianOperator((x + x.conj().T) / 2)
        spec = hermitian_eig(h)
        scale = max(1.0, np.linalg.norm(h.matrix))
        worst = max(worst, np.linalg.norm(spec.reconstruct() - h.matrix) / scale)
    return worst <= 1e-9, f"max relative reconstruction residual {worst:.2e}"


def check_unitary_group_law():
    _, spec, _, _ = _tfim2_setup()
    u1 = evolution_unitary(spec, 0.37)
    u2 = evolution_unitary(spec, 1.91)
    u12 = evolution_unitary(spec, 0.37 + 1.91)
    err = np.max(np.abs(u1 @ u2 - u12))
    return err <= 1e-9, f"U(t1)U(t2) vs U(t1+t2): {err:.2e}"


def check_trace_norm_oracle():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    direct = trace_norm(m)
    oracle = float(np.sum(np.sqrt(np.maximum(np.linalg.eigvalsh(m.conj().T @ m), 0))))
    err = abs(direct - oracle)
    return err <= 1e-10, f"SVD vs eigenvalue route: {err:.2e}"


def check_filter_values():
    p = default_params(1.0, 1.0)
    from scipy.special import erf

    v0 = f_hat(0.0, p)
    expect = 0.5 * (erf(5.0) - erf(1.0))
    t0 = f_time(0.0, p)
    nodes, weights = quadrature_grid(p)
    sum_ok = abs(np.sum(weights) - 2 * p.grid_radius) <= 1e-12
    ok = (
        abs(v0 - expect) <= 1e-12
        and abs(t0 - 1.5 / (2 * np.pi)) <= 1e-12
        and f_hat(0.0, p.with_clamp(True)) == 0.0
        and sum_ok
    )
    return ok, f"fhat(0)={v0:.6f}, f(0)={t0.real:.6f}, sum(w)-2G ok={sum_ok}"


def quadrature_convergence_check(grid=None):
    """|K - K_s| on TFIM-2 under the parameter rule (Lemma-2 scale).

    ``grid`` injects alternative (nodes, weights); the test harness uses
    it to confirm a corrupted rule is caught.
    """
    _, spec, a, p = _tfim2_setup()
    k_exact = exact_jump(spec, a, p)
    k_quad = quadrature_jump(spec, a, p, grid=grid)
    err = float(np.linalg.norm(k_exact.matrix - k_quad.matrix, 2))
    return err <= 1e-3 * a.norm(), f"|K - K_s| = {err:.2e} (bound {1e-3 * a.norm():.1e})"


def check_ground_fixed_point():
    _, spec, a, p = _tfim2_setup(clamp=True)
    res = ground_residual(exact_jump(spec, a, p), spec)
    return res <= 1e-12, f"|K psi0| = {res:.2e}"


def check_dilation_spectrum():
    _, spec, a, p = _tfim2_setup()
    k = quadrature_jump(spec, a, p)
    kd = dilate(k)
    evals = np.sort(np.linalg.eigvalsh(kd.matrix))
    sv = np.linalg.svd(k.matrix, compute_uv=False)
    expect = np.sort(np.concatenate([sv, -sv]))
    err = float(np.max(np.abs(evals - expect)))
    return err <= 1e-10, f"eig(Ktilde) vs +/-sv(K): {err:.2e}"


def check_lemma1_slope():
    _, spec, a, p = _tfim2_setup()
    k = quadrature_jump(spec, a, p)
    kd = dilate(k)
    rng = np.random.default_rng(5)
    rho = _random_density(rng, 4)
    h0 = HermitianOperator(np.zeros((4, 4)))
    sys_k = LindbladSystem(h0, k, include_coherent=False)
    taus = np.logspace(-3, -1, 5)
    errs = [
        trace_norm(exact_dilated_step(kd, rho, t).matrix - superoperator_expm_step(sys_k, rho, t).matrix)
        for t in taus
    ]
    slope = float(np.polyfit(np.log(taus), np.log(errs), 1)[0])
    return abs(slope - 2.0) <= 0.2, f"dilated-step error slope {slope:.3f}"


def check_channel_trotter_slope():
    _, spec, a, p = _tfim2_setup()
    kd = dilate(quadrature_jump(spec, a, p))
    rng = np.random.default_rng(11)
    rho = _random_density(rng, 4)
    u_g = evolution_unitary(spec, p.grid_radius)
    rho_rot = DensityMatrix(u_g @ rho.matrix @ u_g.conj().T, check_positivity=False)
    taus = np.logspace(-2, 0, 5)
    errs = []
    for t in taus:
        cfg = ChannelConfig(
            tau=t, total_time=t, r=1, include_coherent=False, backend="density"
        )
        w = build_w(spec, a, p, cfg.tau_eff)
        out, _ = channel_step_density(rho, w, cfg, p)
        ref = exact_dilated_step(kd, rho_rot, t)
        errs.append(trace_norm(u_g @ out.matrix @ u_g.conj().T - ref.matrix))
    slope = float(np.polyfit(np.log(taus), np.log(errs), 1)[0])
    return abs(slope - 2.0) <= 0.25, f"channel Trotter slope {slope:.3f}"


def check_cancellation_identity():
    model = ModelSpec("tfim", 4, tfim_g=1.2)
    h = model.hamiltonian()
    spec = hermitian_eig(h)
    p = default_params(spec.spectral_norm, spec.gap)
    a = coupling_operator(model)
    tau = 0.3
    w = build_w(spec, a, p, tau)
    naive = build_w_naive(spec, a, p, tau)
    frame = np.kron(np.eye(2), evolution_unitary(spec, p.grid_radius))
    err = float(np.max(np.abs(naive - frame @ w @ frame.conj().T)))
    return err <= 1e-10, f"naive vs cancelled product: {err:.2e}"


def check_cptp_invariants():
    _, spec, a, p = _tfim2_setup()
    cfg = ChannelConfig(tau=0.5, total_time=0.5, r=1, include_coherent=True, backend="density")
    w = build_w(spec, a, p, cfg.tau_eff)
    u_coh = evolution_unitary(spec, cfg.tau)
    rng = np.random.default_rng(9)
    worst_tr, worst_pos, worst_contract = 0.0, 0.0, 0.0
    for _ in range(50):
        r1, r2 = _random_density(rng, 4), _random_density(rng, 4)
        o1, _ = channel_step_density(r1, w, cfg, p, u_coh)
        o2, _ = channel_step_density(r2, w, cfg, p, u_coh)
        worst_tr = max(worst_tr, abs(float(np.trace(o1.matrix).real) - 1.0))
        worst_pos = max(worst_pos, -float(np.min(np.linalg.eigvalsh(o1.matrix))))
        gain = trace_norm(o1.matrix - o2.matrix) - trace_norm(r1.matrix - r2.matrix)
        worst_contract = max(worst_contract, gain)
    ok = worst_tr <= 1e-9 and worst_pos <= 1e-8 and worst_contract <= 1e-9
    return ok, (
        f"trace drift {worst_tr:.1e}, min-eig {-worst_pos:.1e}, "
        f"contractivity excess {worst_contract:.1e}"
    )


def check_transition_matrix():
    lam = synthetic_spectrum("equispaced", 8, span=4.0)
    p = default_params(4.0, float(lam[1] - lam[0]), clamp=True)
    sig = RandomCouplingSpec.uniform(8, 0.5)
    t = transition_matrix(lam, p, sig)
    colsum = float(np.max(np.abs(t.matrix.sum(axis=0))))
    lower = float(np.max(np.abs(np.tril(t.matrix, k=-1))))
    e0 = np.zeros(8)
    e0[0] = 1.0
    fixed = float(np.max(np.abs(evolve_populations(t, e0, 7.3) - e0)))
    ok = colsum <= 1e-12 and lower == 0.0 and fixed <= 1e-12
    return ok, f"colsum {colsum:.1e}, lower-tri {lower:.1e}, e0 fixed {fixed:.1e}"


def check_trajectory_density_consistency():
    model = ModelSpec("tfim", 2, tfim_g=1.2)
    base = dict(tau=0.2, total_time=4.0, mode="continuous", r=1, record_stride=5)
    dens = run_simulation(model, ChannelConfig(backend="density", **base), workers=1)
    traj = run_simulation(
        model, ChannelConfig(backend="trajectory", reps=400, seed=21, **base), workers=1
    )
    z = np.abs(traj.overlap_mean - dens.overlap_mean) / np.maximum(traj.overlap_se, 1e-6)
    worst = float(np.max(z[1:]))
    return worst <= 3.0, f"max |z| over checkpoints: {worst:.2f}"


def check_tfim4_continuous():
    model = ModelSpec("tfim", 4, tfim_g=1.2)
    spec = hermitian_eig(model.hamiltonian())
    cfg = ChannelConfig(
        tau=0.1, total_time=80.0, mode="continuous", backend="trajectory", reps=100, seed=7,
        record_stride=10,
    )
    rec = run_simulation(model, cfg)
    e_err = abs(rec.final_energy - spec.eigenvalues[0])
    ok = rec.final_overlap >= 0.9 and e_err <= 0.1 * spec.gap
    return ok, f"overlap {rec.final_overlap:.3f}, energy error {e_err:.3f} (limit {0.1 * spec.gap:.3f})"


def check_tfim4_cost_ratio():
    model = ModelSpec("tfim", 4, tfim_g=1.2)
    base = dict(total_time=80.0, backend="trajectory", reps=100, seed=7)
    cont = run_simulation(model, ChannelConfig(tau=0.1, mode="continuous", **base))
    disc = run_simulation(model, ChannelConfig(tau=1.0, mode="discrete", r=1, **base))
    hc = cont.h_time_at_overlap(0.9)
    hd = disc.h_time_at_overlap(0.9)
    if hc is None or hd is None or disc.final_overlap < 0.9:
        return False, "one of the runs failed to reach overlap 0.9"
    return hd <= hc / 5, f"h_time to 0.9 overlap: discrete {hd:.0f} vs continuous {hc:.0f}"


def check_tfim4_nyquist():
    model = ModelSpec("tfim", 4, tfim_g=1.2)
    spec = hermitian_eig(model.hamiltonian())
    p = default_params(spec.spectral_norm, spec.gap)
    a = coupling_operator(model)
    k = exact_jump(spec, a, p)
    k2 = quadrature_jump(spec, a, p.with_s_radius(2 * p.s_radius))
    k4 = quadrature_jump(spec, a, p.with_s_radius(4 * p.s_radius))
    saturation = float(np.linalg.norm(k4.matrix - k2.matrix, 2))
    integral = float(np.linalg.norm(k.matrix - k2.matrix, 2))
    ok = saturation <= 1e-6 and integral <= 1e-6
    return ok, f"doubling change {saturation:.1e}, |K - K_s(2S)| {integral:.1e}"


def check_global_first_order():
    h, spec, a, p = _tfim2_setup()
    kq = quadrature_jump(spec, a, p)
    sys_mod = LindbladSystem(h, kq, include_coherent=True)
    rng = np.random.default_rng(11)
    rho_i = _random_density(rng, 4)
    u_g = evolution_unitary(spec, p.grid_radius)
    rho0 = DensityMatrix(u_g @ rho_i.matrix @ u_g.conj().T, check_positivity=False)
    ref = evolve_ode(sys_mod, rho0, 2.0, dt=1e-3)
    errs = []
    taus = [0.2, 0.1, 0.05, 0.025]
    for t in taus:
        cfg = ChannelConfig(tau=t, total_time=2.0, r=1, include_coherent=True, backend="density")
        w = build_w(spec, a, p, cfg.tau_eff)
        u_coh = evolution_unitary(spec, t)
        rho = rho_i
        for _ in range(cfg.n_steps):
            rho, _ = channel_step_density(rho, w, cfg, p, u_coh)
        back = u_g @ rho.matrix @ u_g.conj().T
        errs.append(trace_norm(back - ref.matrix))
    slope = float(np.polyfit(np.log(taus), np.log(errs), 1)[0])
    return abs(slope - 1.0) <= 0.25, f"composed-scheme error slope {slope:.3f}"


def check_discrete_fixed_point():
    model = ModelSpec("tfim", 4, tfim_g=1.2)
    spec = hermitian_eig(model.hamiltonian())
    p = default_params(spec.spectral_norm, spec.gap)
    a = coupling_operator(model)
    cfg = ChannelConfig(tau=1.0, total_time=100.0, mode="discrete", r=1, backend="density")
    w = build_w(spec, a, p, cfg.tau_eff)
    u_coh = evolution_unitary(spec, cfg.tau)
    rho_g = DensityMatrix.pure(spec.ground_state)
    rho, worst = rho_g, 0.0
    for _ in range(100):
        rho, _ = channel_step_density(rho, w, cfg, p, u_coh)
        worst = max(worst, trace_norm(rho.matrix - rho_g.matrix))
    return worst <= 2e-2, f"max drift from ground state {worst:.2e}"


def check_ergodicity():
    lam = synthetic_spectrum("equispaced", 8, span=4.0)
    p = default_params(4.0, float(lam[1] - lam[0]), clamp=True)
    sig = RandomCouplingSpec.uniform(8, 0.5)
    p0 = np.full(8, 1 / 8)
    rep = ergodicity_experiment(lam, sig, p, p0, tau=0.01, t_final=3.0, reps=500, seed=3)
    t = transition_matrix(lam, p, sig)
    e0 = np.zeros(8)
    e0[0] = 1.0
    final = evolve_populations(t, p0, 50.0 / t.min_outflow_rate())
    limit = float(np.max(np.abs(final - e0)))
    ok = rep.consistent() and limit <= 1e-6
    return ok, f"outside-3SE count {rep.n_outside_3se}, limit deviation {limit:.1e}"


def check_concentration():
    lam = synthetic_spectrum("equispaced", 4, span=3.0)
    p = default_params(3.0, 1.0, clamp=True)
    sig = RandomCouplingSpec.uniform(4, 0.5)
    rep = concentration_experiment(
        lam, sig, p, np.full(4, 0.25), taus=[0.1, 0.05, 0.025, 0.0125],
        t_final=2.0, reps=200, seed=5,
    )
    return 0.4 <= rep.slope <= 0.7, f"deviation slope {rep.slope:.3f}"


def check_hubbard4_discrete():
    model = ModelSpec("hubbard1d", 4, hubbard_t=1.0, hubbard_u=4.0)
    cfg = ChannelConfig(
        tau=0.5, total_time=100.0, mode="discrete", r=2, backend="trajectory",
        reps=100, seed=7, record_stride=10,
    )
    rec = run_simulation(model, cfg)
    return rec.final_overlap >= 0.85, f"final overlap {rec.final_overlap:.3f}"


FAST_CHECKS = [
    ("eig-reconstruction", check_eig_reconstruction),
    ("unitary-group-law", check_unitary_group_law),
    ("trace-norm-oracle", check_trace_norm_oracle),
    ("filter-values", check_filter_values),
    ("quadrature-convergence", quadrature_convergence_check),
    ("ground-fixed-point", check_ground_fixed_point),
    ("dilation-spectrum", check_dilation_spectrum),
    ("lemma1-slope", check_lemma1_slope),
    ("channel-trotter-slope", check_channel_trotter_slope),
    ("cancellation-identity", check_cancellation_identity),
    ("cptp-invariants", check_cptp_invariants),
    ("transition-matrix", check_transition_matrix),
    ("trajectory-density-consistency", check_trajectory_density_consistency),
]

FULL_CHECKS = [
    ("tfim4-continuous", check_tfim4_continuous),
    ("tfim4-cost-ratio", check_tfim4_cost_ratio),
    ("tfim4-nyquist", check_tfim4_nyquist),
    ("global-first-order", check_global_first_order),
    ("discrete-fixed-point", check_discrete_fixed_point),
    ("ergodicity", check_ergodicity),
    ("concentration", check_concentration),
    ("hubbard4-discrete", check_hubbard4_discrete),
]


def run_verify(level: str = "fast", *, progress=None) -> tuple[bool, list[CheckResult]]:
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    checks = list(FAST_CHECKS)
    if level == "full":
        checks += FULL_CHECKS
    results = []
    for name, fn in checks:
        start = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - start
        res = CheckResult(name, bool(passed), detail, round(elapsed, 3))
        results.append(res)
        if progress is not None:
            progress(res)
    return all(r.passed for r in results), results


def report_dict(level: str, results: list[CheckResult]) -> dict:
    return {
        "level": level,
        "passed": all(r.passed for r in results),
        "n_failed": sum(not r.passed for r in results),
        "checks": [asdict(r) for r in results],
    }
