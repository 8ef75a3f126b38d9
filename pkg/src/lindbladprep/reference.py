"""Oracle-grade evolutions the circuit-level approximations are tested against.

* ``evolve_ode``: fixed-step RK4 on the master equation
  ``d rho/dt = -i[H, rho] + K rho K^dag - {K^dag K, rho}/2``;
* ``superoperator_matrix`` / ``superoperator_expm_step``: the vectorized
  generator and its dense exponential (small dimensions only);
* ``exact_dilated_step``: one exact dilated-unitary step
  ``Tr_a exp(-i Ktilde sqrt(tau)) [|0><0| x rho] exp(i Ktilde sqrt(tau))``;
* ``discrete_map_exact``: the dilated step followed by the exact coherent
  conjugation ``e^{-iH tau} (.) e^{iH tau}``.

All steps re-Hermitize their output and are trace preserving to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .jump import DilatedJump, JumpOperator, dilate
from .linalg import (
    DensityMatrix,
    HermitianOperator,
    LinalgError,
    SpectralDecomposition,
    hermitian_eig,
    partial_trace_ancilla,
)

__all__ = [
    "LindbladSystem",
    "lindbladian_apply",
    "evolve_ode",
    "superoperator_matrix",
    "superoperator_expm_step",
    "exact_dissipative_step",
    "exact_dilated_step",
    "discrete_map_exact",
]

# Superoperator exponentials are only built for tiny systems.
_SUPEROP_MAX_DIM = 16


@dataclass(frozen=True)
class LindbladSystem:
    """Generator data: Hamiltonian, jump operator, coherent-part switch."""

    h: HermitianOperator
    k: JumpOperator
    include_coherent: bool = True

    def __post_init__(self):
        if self.h.dim != self.k.dim:
            raise ValueError("Hamiltonian and jump operator dimension mismatch")

    @property
    def dim(self) -> int:
        return self.h.dim


def lindbladian_apply(sys: LindbladSystem, rho: np.ndarray) -> np.ndarray:
    """Apply the generator to a (not necessarily normalized) matrix."""
    k = sys.k.matrix
    kdk = k.conj().T @ k
    out = k @ rho @ k.conj().T - 0.5 * (kdk @ rho + rho @ kdk)
    if sys.include_coherent:
        h = sys.h.matrix
        out = out - 1j * (h @ rho - rho @ h)
    return out


def _rk4_step(sys: LindbladSystem, rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = lindbladian_apply(sys, rho)
    k2 = lindbladian_apply(sys, rho + 0.5 * dt * k1)
    k3 = lindbladian_apply(sys, rho + 0.5 * dt * k2)
    k4 = lindbladian_apply(sys, rho + dt * (k3))
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve_ode(
    sys: LindbladSystem, rho0: DensityMatrix, t_final: float, dt: float
) -> DensityMatrix:
    """Fixed-step RK4 integration of the master equation up to ``t_final``.

    Each step is re-Hermitized and trace-renormalized; a per-step trace
    drift beyond 1e-6 aborts the run (the step size is too large for the
    generator's stiffness).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    rho = np.array(rho0.matrix, dtype=complex)
    if t_final == 0:
        return rho0
    n_steps = max(1, int(np.ceil(t_final / dt - 1e-12)))
    step = t_final / n_steps
    for _ in range(n_steps):
        rho = _rk4_step(sys, rho, step)
        rho = (rho + rho.conj().T) / 2
        tr = float(np.trace(rho).real)
        if not np.isfinite(tr) or abs(tr - 1.0) > 1e-6:
            raise LinalgError(
                f"trace drifted to {tr} in one RK4 step; decrease dt"
            )
        rho /= tr
    return DensityMatrix(rho, check_positivity=False)


def superoperator_matrix(sys: LindbladSystem) -> np.ndarray:
    """Column-stacking matrix of the generator (dim <= 16 only).

    With ``vec`` stacking columns, ``vec(L[rho]) = M vec(rho)`` where
    ``M = -i (I x H - H^T x I) + conj(K) x K
          - (I x K^dag K + (K^dag K)^T x I) / 2``.
    """
    n = sys.dim
    if n > _SUPEROP_MAX_DIM:
        raise ValueError(f"superoperator matrix restricted to dim <= {_SUPEROP_MAX_DIM}")
    eye = np.eye(n, dtype=complex)
    k = sys.k.matrix
    kdk = k.conj().T @ k
    m = np.kron(k.conj(), k) - 0.5 * (np.kron(eye, kdk) + np.kron(kdk.T, eye))
    if sys.include_coherent:
        h = sys.h.matrix
        m = m - 1j * (np.kron(eye, h) - np.kron(h.T, eye))
    return m


def superoperator_expm_step(
    sys: LindbladSystem, rho: DensityMatrix, t: float
) -> DensityMatrix:
    """Exact channel ``exp(L t)`` via the dense superoperator exponential."""
    m = superoperator_matrix(sys)
    vec = rho.matrix.reshape(-1, order="F")
    out = (scipy.linalg.expm(m * t) @ vec).reshape(rho.matrix.shape, order="F")
    out = (out + out.conj().T) / 2
    return DensityMatrix(out / np.trace(out).real, check_positivity=False)


def exact_dissipative_step(
    k: JumpOperator, rho: DensityMatrix, tau: float, *, substeps: int = 1000
) -> DensityMatrix:
    """Oracle ``exp(L_K tau)`` with the coherent part switched off."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0:
        return rho
    h0 = HermitianOperator(np.zeros((k.dim, k.dim)))
    sys = LindbladSystem(h0, k, include_coherent=False)
    return evolve_ode(sys, rho, tau, tau / substeps)


def exact_dilated_step(
    kd: DilatedJump, rho: DensityMatrix, tau: float
) -> DensityMatrix:
    """One exact single-ancilla step: dilate, evolve, trace out.

    CPTP by construction (unitary conjugation of ``|0><0| x rho`` followed
    by partial trace).
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    n = kd.dim // 2
    spec = hermitian_eig(HermitianOperator(kd.matrix))
    u = (spec.eigenvectors * np.exp(-1j * spec.eigenvalues * np.sqrt(tau))) @ (
        spec.eigenvectors.conj().T
    )
    block = u[:, :n]  # only the |0>-ancilla column block acts on rho
    big = block @ rho.matrix @ block.conj().T
    out = partial_trace_ancilla(big)
    out = (out + out.conj().T) / 2
    return DensityMatrix(out, check_positivity=False)


def discrete_map_exact(
    sys: LindbladSystem, rho: DensityMatrix, tau: float,
    spec: SpectralDecomposition | None = None,
) -> DensityMatrix:
    """Exact dilated dissipative step followed by ``e^{-iH tau}`` conjugation.

    This is the map the r-segment circuit scheme converges to as the
    segment count grows; with the coherent flag off the conjugation is
    skipped.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    out = exact_dilated_step(dilate(sys.k), rho, tau)
    if not sys.include_coherent:
        return out
    if spec is None:
        spec = hermitian_eig(sys.h)
    u = (spec.eigenvectors * np.exp(-1j * spec.eigenvalues * tau)) @ (
        spec.eigenvectors.conj().T
    )
    m = u @ out.matrix @ u.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(m, check_positivity=False)
