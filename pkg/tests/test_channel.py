import numpy as np
import pytest
import scipy.linalg

from lindbladprep.channel import (
    ChannelConfig,
    ChannelError,
    CostLedger,
    build_w,
    build_w_naive,
    channel_step_density,
    run_simulation,
    step_cost,
    trajectory_step,
)
from lindbladprep.filters import default_params, f_time, quadrature_grid
from lindbladprep.jump import dilate, quadrature_jump
from lindbladprep.linalg import (
    DensityMatrix,
    HermitianOperator,
    evolution_unitary,
    hermitian_eig,
    trace_norm,
)
from lindbladprep.models import PAULI_X, PAULI_Y, ModelSpec, coupling_operator
from lindbladprep.reference import exact_dilated_step

from conftest import random_density, random_state


def tfim_setup(sites=2, clamp=False):
    model = ModelSpec("tfim", sites, tfim_g=1.2)
    h = model.hamiltonian()
    spec = hermitian_eig(h)
    p = default_params(spec.spectral_norm, spec.gap, clamp=clamp)
    return model, h, spec, coupling_operator(model), p


class TestChannelConfig:
    def test_step_count(self):
        cfg = ChannelConfig(tau=0.1, total_time=8.0)
        assert cfg.n_steps == 80

    def test_non_integer_steps_rejected(self):
        with pytest.raises(ValueError):
            ChannelConfig(tau=0.3, total_time=1.0)

    def test_tau_eff_segments(self):
        cfg = ChannelConfig(tau=1.0, total_time=2.0, mode="discrete", r=2)
        # r segments of unitary argument sqrt(tau)/r compose to sqrt(tau)
        assert cfg.tau_eff == pytest.approx(0.25)
        assert cfg.r * np.sqrt(cfg.tau_eff) == pytest.approx(np.sqrt(cfg.tau))

    def test_invalid_fields(self):
        with pytest.raises(ValueError):
            ChannelConfig(tau=0.1, total_time=1.0, mode="warp")
        with pytest.raises(ValueError):
            ChannelConfig(tau=0.1, total_time=1.0, backend="tensor")
        with pytest.raises(ValueError):
            ChannelConfig(tau=0.1, total_time=1.0, r=0)
        with pytest.raises(ValueError):
            ChannelConfig(tau=0.1, total_time=1.0, initial_state="vacuum")


class TestBuildW:
    def test_unitary(self):
        _, _, spec, a, p = tfim_setup(2)
        w = build_w(spec, a, p, 0.4)
        assert np.max(np.abs(w.conj().T @ w - np.eye(8))) <= 1e-10

    def test_zero_coupling_telescopes_to_identity(self):
        _, _, spec, _, p = tfim_setup(2)
        w = build_w(spec, HermitianOperator(np.zeros((4, 4))), p, 0.4)
        assert np.max(np.abs(w - np.eye(8))) <= 1e-12

    def test_node_factor_matches_expm_oracle(self):
        """Each exactly-exponentiated gate equals expm of its generator."""
        from lindbladprep.channel import _atilde_blocks

        _, _, spec, a, p = tfim_setup(2)
        a_spec = hermitian_eig(a)
        nodes, weights = quadrature_grid(p)
        x = np.sqrt(0.4)
        for idx in (0, len(nodes) // 2, len(nodes) - 1):
            f_l = f_time(nodes[idx], p)
            phi = 0.5 * x * weights[idx] * abs(f_l)
            theta = float(np.angle(f_l))
            c, o01, o10 = _atilde_blocks(a_spec, phi, theta)
            built = np.block([[c, o01], [o10, c]])
            sigma = weights[idx] * (PAULI_X * f_l.real + PAULI_Y * f_l.imag)
            gen = np.kron(sigma, a.matrix)
            oracle = scipy.linalg.expm(-0.5j * x * gen)
            assert np.max(np.abs(built - oracle)) <= 1e-12

    def test_cancellation_identity_four_qubits(self):
        _, _, spec, a, p = tfim_setup(4)
        tau = 0.3
        w = build_w(spec, a, p, tau)
        naive = build_w_naive(spec, a, p, tau)
        frame = np.kron(np.eye(2), evolution_unitary(spec, p.grid_radius))
        assert np.max(np.abs(naive - frame @ w @ frame.conj().T)) <= 1e-10

    def test_trotter_slope_against_dilated_step(self):
        _, _, spec, a, p = tfim_setup(2)
        kd = dilate(quadrature_jump(spec, a, p))
        rng = np.random.default_rng(11)
        rho = random_density(rng, 4)
        u_g = evolution_unitary(spec, p.grid_radius)
        rho_rot = DensityMatrix(u_g @ rho.matrix @ u_g.conj().T, check_positivity=False)
        taus = np.logspace(-2, 0, 5)
        errs = []
        for t in taus:
            cfg = ChannelConfig(tau=t, total_time=t, r=1, include_coherent=False, backend="density")
            w = build_w(spec, a, p, cfg.tau_eff)
            out, _ = channel_step_density(rho, w, cfg, p)
            ref = exact_dilated_step(kd, rho_rot, t)
            errs.append(trace_norm(u_g @ out.matrix @ u_g.conj().T - ref.matrix))
        slope = np.polyfit(np.log(taus), np.log(errs), 1)[0]
        assert abs(slope - 2.0) <= 0.25

    def test_segment_refinement_converges_to_dilated_step(self):
        """W(sqrt(tau)/r)^r approaches exp(-i sqrt(tau) Ktilde) as r grows."""
        _, _, spec, a, p = tfim_setup(2)
        kd = dilate(quadrature_jump(spec, a, p))
        rng = np.random.default_rng(3)
        rho = random_density(rng, 4)
        u_g = evolution_unitary(spec, p.grid_radius)
        rho_rot = DensityMatrix(u_g @ rho.matrix @ u_g.conj().T, check_positivity=False)
        tau = 1.0
        ref = exact_dilated_step(kd, rho_rot, tau)
        errs = []
        for r in (1, 2, 4):
            cfg = ChannelConfig(
                tau=tau, total_time=tau, mode="discrete", r=r,
                include_coherent=False, backend="density",
            )
            w = build_w(spec, a, p, cfg.tau_eff)
            out, _ = channel_step_density(rho, w, cfg, p)
            errs.append(trace_norm(u_g @ out.matrix @ u_g.conj().T - ref.matrix))
        assert errs[1] < errs[0] and errs[2] < errs[1]
        assert errs[2] <= errs[0] / 8  # ~r^2 suppression


class TestChannelStepDensity:
    def test_cptp_per_step(self, rng):
        _, _, spec, a, p = tfim_setup(2)
        cfg = ChannelConfig(tau=0.5, total_time=0.5, backend="density")
        w = build_w(spec, a, p, cfg.tau_eff)
        u = evolution_unitary(spec, cfg.tau)
        rho = random_density(rng, 4)
        out, delta = channel_step_density(rho, w, cfg, p, u)
        assert abs(np.trace(out.matrix).real - 1.0) <= 1e-9
        assert np.min(np.linalg.eigvalsh(out.matrix)) >= -1e-8
        assert delta.controlled_a_count == 2 * (2 * p.m_half + 1)

    def test_contractive(self, rng):
        _, _, spec, a, p = tfim_setup(2)
        cfg = ChannelConfig(tau=0.5, total_time=0.5, backend="density")
        w = build_w(spec, a, p, cfg.tau_eff)
        u = evolution_unitary(spec, cfg.tau)
        for _ in range(20):
            r1, r2 = random_density(rng, 4), random_density(rng, 4)
            o1, _ = channel_step_density(r1, w, cfg, p, u)
            o2, _ = channel_step_density(r2, w, cfg, p, u)
            assert trace_norm(o1.matrix - o2.matrix) <= trace_norm(r1.matrix - r2.matrix) + 1e-9

    def test_fixed_point_single_step(self):
        _, _, spec, a, p = tfim_setup(4)
        rho_g = DensityMatrix.pure(spec.ground_state)
        for tau in (0.1, 1.0):
            cfg = ChannelConfig(tau=tau, total_time=tau, backend="density")
            w = build_w(spec, a, p, cfg.tau_eff)
            u = evolution_unitary(spec, tau)
            out, _ = channel_step_density(rho_g, w, cfg, p, u)
            assert trace_norm(out.matrix - rho_g.matrix) <= 1e-2

    def test_missing_coherent_unitary(self, rng):
        _, _, spec, a, p = tfim_setup(2)
        cfg = ChannelConfig(tau=0.5, total_time=0.5, backend="density")
        w = build_w(spec, a, p, cfg.tau_eff)
        with pytest.raises(ChannelError):
            channel_step_density(random_density(rng, 4), w, cfg, p, None)


class TestCostLedger:
    def test_monotone(self):
        led = CostLedger()
        led.add(CostLedger(1.5, 3))
        led.add(CostLedger(0.5, 2))
        assert led.hamiltonian_time == 2.0 and led.controlled_a_count == 5
        with pytest.raises(ValueError):
            led.add(CostLedger(-1.0, 0))

    def test_step_cost_formula(self):
        _, _, spec, a, p = tfim_setup(4)
        cfg = ChannelConfig(tau=0.1, total_time=80.0, backend="trajectory")
        delta = step_cost(p, cfg)
        factors = 2 * (2 * p.m_half + 1)
        assert delta.controlled_a_count == factors
        assert delta.hamiltonian_time == pytest.approx(factors * p.tau_s + 0.1)
        cfg_r = ChannelConfig(tau=1.0, total_time=80.0, mode="discrete", r=3)
        delta_r = step_cost(p, cfg_r)
        assert delta_r.controlled_a_count == 3 * factors
        assert delta_r.hamiltonian_time == pytest.approx(3 * factors * p.tau_s + 1.0)

    def test_dissipative_only_cost(self):
        _, _, spec, a, p = tfim_setup(2)
        cfg = ChannelConfig(tau=0.1, total_time=1.0, include_coherent=False)
        assert step_cost(p, cfg).hamiltonian_time == pytest.approx(
            2 * (2 * p.m_half + 1) * p.tau_s
        )


class TestTrajectoryStep:
    def test_identity_w(self, rng):
        _, h, spec, a, p = tfim_setup(2)
        cfg = ChannelConfig(tau=0.3, total_time=0.3)
        psi = random_state(rng, 4)
        u = evolution_unitary(spec, cfg.tau)
        out, bit, _ = trajectory_step(psi, np.eye(8, dtype=complex), cfg, p, u, rng)
        assert bit == 0
        assert np.allclose(out, u @ psi)

    def test_ground_state_rarely_clicks(self):
        _, _, spec, a, p = tfim_setup(4)
        cfg = ChannelConfig(tau=0.1, total_time=0.1)
        w = build_w(spec, a, p, cfg.tau_eff)
        u = evolution_unitary(spec, cfg.tau)
        psi = spec.ground_state.copy()
        n = psi.size
        branch1 = w[n:, :n] @ psi
        assert np.vdot(branch1, branch1).real <= 1e-2

    def test_norm_validation(self, rng):
        _, _, spec, a, p = tfim_setup(2)
        cfg = ChannelConfig(tau=0.3, total_time=0.3)
        w = build_w(spec, a, p, cfg.tau_eff)
        with pytest.raises(ChannelError):
            trajectory_step(2.0 * random_state(rng, 4), w, cfg, p, None, rng)


class TestRunSimulation:
    def test_density_deterministic(self):
        model = ModelSpec("tfim", 2, tfim_g=1.2)
        cfg = ChannelConfig(tau=0.5, total_time=2.0, backend="density")
        r1 = run_simulation(model, cfg, workers=1)
        r2 = run_simulation(model, cfg, workers=1)
        assert np.array_equal(r1.energy_mean, r2.energy_mean)
        assert np.array_equal(r1.overlap_mean, r2.overlap_mean)

    def test_trajectory_seed_determinism_and_worker_independence(self):
        model = ModelSpec("tfim", 2, tfim_g=1.2)
        cfg = ChannelConfig(tau=0.5, total_time=2.0, backend="trajectory", reps=6, seed=3)
        serial = run_simulation(model, cfg, workers=1)
        pooled = run_simulation(model, cfg, workers=2)
        assert np.array_equal(serial.energy_mean, pooled.energy_mean)
        assert np.array_equal(serial.overlap_se, pooled.overlap_se)

    def test_different_seeds_differ(self):
        model = ModelSpec("tfim", 2, tfim_g=1.2)
        base = dict(tau=0.5, total_time=4.0, backend="trajectory", reps=4)
        r1 = run_simulation(model, ChannelConfig(seed=1, **base), workers=1)
        r2 = run_simulation(model, ChannelConfig(seed=2, **base), workers=1)
        assert not np.array_equal(r1.overlap_mean, r2.overlap_mean)

    def test_trajectory_matches_density_within_3se(self):
        model = ModelSpec("tfim", 2, tfim_g=1.2)
        base = dict(tau=0.2, total_time=4.0, record_stride=4)
        dens = run_simulation(model, ChannelConfig(backend="density", **base), workers=1)
        traj = run_simulation(
            model, ChannelConfig(backend="trajectory", reps=2000, seed=17, **base), workers=1
        )
        for name in ("overlap", "energy"):
            mean = getattr(traj, f"{name}_mean")
            se = getattr(traj, f"{name}_se")
            ref = getattr(dens, f"{name}_mean")
            z = np.abs(mean[1:] - ref[1:]) / np.maximum(se[1:], 1e-9)
            assert float(np.max(z)) <= 3.0

    def test_record_stride_and_cost_columns(self):
        model = ModelSpec("tfim", 2, tfim_g=1.2)
        cfg = ChannelConfig(tau=0.5, total_time=5.0, backend="density", record_stride=4)
        rec = run_simulation(model, cfg, workers=1)
        assert list(rec.steps) == [0, 4, 8, 10]
        per = step_cost(rec_params(rec), cfg)
        assert rec.h_time[-1] == pytest.approx(10 * per.hamiltonian_time)
        assert rec.a_gates[-1] == 10 * per.controlled_a_count

    def test_initial_state_options(self):
        model = ModelSpec("tfim", 2, tfim_g=1.2)
        rec = run_simulation(
            model,
            ChannelConfig(tau=0.5, total_time=0.5, backend="density", initial_state="ground"),
            workers=1,
        )
        assert rec.overlap_mean[0] == pytest.approx(1.0)
        rec2 = run_simulation(
            model,
            ChannelConfig(
                tau=0.5, total_time=0.5, backend="density", initial_state="eigenstate:1"
            ),
            workers=1,
        )
        assert rec2.overlap_mean[0] == pytest.approx(0.0, abs=1e-12)

    def test_initial_overlap_is_zero(self):
        model = ModelSpec("tfim", 4, tfim_g=1.2)
        cfg = ChannelConfig(tau=0.5, total_time=0.5, backend="density")
        rec = run_simulation(model, cfg, workers=1)
        assert rec.overlap_mean[0] <= 1e-15

    def test_worker_count_from_env(self, monkeypatch):
        from lindbladprep.channel import resolve_workers

        monkeypatch.setenv("LINDBLADPREP_WORKERS", "3")
        assert resolve_workers() == 3
        monkeypatch.setenv("LINDBLADPREP_WORKERS", "0")
        with pytest.raises(ValueError):
            resolve_workers()
        monkeypatch.delenv("LINDBLADPREP_WORKERS")
        assert resolve_workers() >= 1


def rec_params(rec):
    f = rec.meta["filter"]
    from lindbladprep.filters import FilterParams

    return FilterParams(
        a=f["a"], delta_a=f["delta_a"], b=f["b"], delta_b=f["delta_b"],
        s_radius=f["s_radius"], tau_s=f["tau_s"], m_half=f["m_half"],
        clamp_nonnegative=f["clamp_nonnegative"],
    )
