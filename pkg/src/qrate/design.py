"""Plant description, design parameters, and the derived certificate
constants that both endpoints of the quantized feedback loop share.

The certificate inequalities validated here are what later make the
closed-loop value function contract at rate ``nu`` during stabilizing
stages; all of them are plain arithmetic over the constants computed in
:func:`derive_constants`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import matnum

__all__ = [
    "PlantModel",
    "DesignParams",
    "DerivedConstants",
    "CertificateReport",
    "check_assumptions",
    "derive_constants",
    "validate_design",
    "synthesize_design",
]

# Safety factors for the sequential parameter synthesis: each inequality is
# satisfied with half of the available slack.
THETA_RHO = 0.5
THETA_PHI = 0.5


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Continuous-time linear plant with a fixed feedback gain.

    dx/dt = A x + B u + D d, sampled every ``dt`` seconds; each sample is
    quantized on a hypercube grid with ``n_levels`` cells per dimension.
    """

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    K: np.ndarray
    dt: float
    n_levels: int

    def __post_init__(self):
        A = matnum.as_matrix(self.A, "A")
        B = matnum.as_matrix(self.B, "B")
        D = matnum.as_matrix(self.D, "D")
        K = matnum.as_matrix(self.K, "K")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if B.shape[0] != n:
            raise ValueError("B must have as many rows as A")
        if D.shape[0] != n:
            raise ValueError("D must have as many rows as A")
        if K.shape != (B.shape[1], n):
            raise ValueError("K must be n_u x n_x")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive")
        if int(self.n_levels) != self.n_levels or self.n_levels < 2:
            raise ValueError("n_levels must be an integer >= 2")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "n_levels", int(self.n_levels))

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_d(self) -> int:
        return self.D.shape[1]

    def closed_loop(self) -> np.ndarray:
        return self.A + self.B @ self.K


@dataclass(frozen=True, eq=False)
class DesignParams:
    """Tunable quantities of the communication and control strategy.

    radius0        initial quantization radius (shared by both endpoints)
    search_margin  extra growth factor applied to the radius while searching
    dist_level     disturbance level absorbed by the searching propagation
    psi, rho, phi  certificate triple entering the contraction inequalities
    Q              Lyapunov right-hand side; identity when None
    floor_margin   lower floor applied to the per-period growth factor so
                   the searching-stage arithmetic stays meaningful when the
                   open-loop growth is exactly 1
    """

    radius0: float
    search_margin: float
    dist_level: float
    psi: float
    rho: float
    phi: float
    Q: np.ndarray | None = None
    floor_margin: float = 0.01

    def __post_init__(self):
        for name in ("radius0", "search_margin", "dist_level", "psi", "rho", "phi", "floor_margin"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number")
            object.__setattr__(self, name, float(v))
        if self.Q is not None:
            Q = matnum.as_matrix(self.Q, "Q")
            if Q.shape[0] != Q.shape[1]:
                raise ValueError("Q must be square")
            if np.max(np.abs(Q - Q.T)) > 1e-10:
                raise ValueError("Q must be symmetric")
            if np.linalg.eigvalsh((Q + Q.T) / 2)[0] <= 0:
                raise ValueError("Q must be positive definite")
            object.__setattr__(self, "Q", Q)

    def resolved_q(self, n_x: int) -> np.ndarray:
        if self.Q is None:
            return np.eye(n_x)
        if self.Q.shape[0] != n_x:
            raise ValueError("Q dimension does not match the plant")
        return self.Q


@dataclass(frozen=True, eq=False)
class DerivedConstants:
    """Constants shared by encoder, decoder, integrator, and checkers.

    ``nu`` is always recorded, even when it is not below 1; whether the
    contraction certificate holds is reported separately.
    """

    S_closed: np.ndarray      # one-period closed-loop transition e^{(A+BK)dt}
    S_open: np.ndarray        # one-period open-loop transition e^{A dt}
    growth: float             # ||S_open||, per-period open-loop growth
    growth_eff: float         # max(growth, 1 + floor_margin)
    search_growth: float      # (1 + search_margin) * growth_eff
    search_ratio: float       # (search_growth - 1) / (growth_eff - 1)
    dist_gain: float          # integral of ||e^{As} D|| over one period
    P: np.ndarray             # Lyapunov solution for S_closed
    Q: np.ndarray             # resolved Lyapunov right-hand side
    chi: float                # quantization-error amplification constant
    nu: float                 # per-step contraction factor of the value function
    nu_base: float            # nu without the (1 + 1/psi) phi rho term
    peak_closed: float        # max ||e^{(A+BK)s}|| over one period
    peak_open: float          # max ||e^{As}|| over one period
    intersample_gain: float   # 2*peak_closed + peak_open
    data_rate_bits: float     # log2(n_levels^n_x + 2) / dt
    n_levels: int

    @property
    def n_x(self) -> int:
        return self.P.shape[0]


@dataclass
class CertificateReport:
    """Outcome of checking the design inequalities for a concrete plant."""

    assumption1_ok: bool
    assumption2_ok: bool
    psi_ok: bool
    rho_ok: bool
    nu_ok: bool
    nu: float
    messages: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return (self.assumption1_ok and self.assumption2_ok
                and self.psi_ok and self.rho_ok and self.nu_ok)


def check_assumptions(m: PlantModel) -> tuple[bool, bool]:
    """(closed loop stable, per-period growth below the grid count)."""
    stable = matnum.is_schur_stable(matnum.expm(m.closed_loop(), m.dt))
    growth = matnum.inf_norm_mat(matnum.expm(m.A, m.dt))
    return stable, growth < m.n_levels


def _growth_eff(m: PlantModel, p: DesignParams) -> float:
    growth = matnum.inf_norm_mat(matnum.expm(m.A, m.dt))
    return max(growth, 1.0 + p.floor_margin)


def _chi_nu(m: PlantModel, p: DesignParams):
    """Lyapunov solution and the scalar certificate quantities.

    Raises if the closed loop is not stable (no Lyapunov solution).
    """
    S = matnum.expm(m.closed_loop(), m.dt)
    Q = p.resolved_q(m.n_x)
    P = matnum.dlyap(S, Q)
    q_min, _ = matnum.sym_eig_extremes(Q)
    _, p_max = matnum.sym_eig_extremes(P)
    sps = matnum.inf_norm_mat(S.T @ P @ S)
    n_x = m.n_x
    chi = 2.0 * n_x**2 * sps**2 / q_min + n_x * sps

    n = m.n_levels
    geff = _growth_eff(m, p)
    contraction = 1.0 - q_min / (2.0 * p_max)
    quantization = ((n - 1) ** 2 / n**2) * chi / p.rho + (1.0 + p.psi) * geff**2 / n**2
    nu_base = max(contraction, quantization)
    nu = nu_base + (1.0 + 1.0 / p.psi) * p.phi * p.rho
    return S, Q, P, chi, nu_base, nu


def derive_constants(m: PlantModel, p: DesignParams) -> DerivedConstants:
    """Compute every shared constant for the given plant and parameters."""
    S, Q, P, chi, nu_base, nu = _chi_nu(m, p)
    S_open = matnum.expm(m.A, m.dt)
    growth = matnum.inf_norm_mat(S_open)
    geff = max(growth, 1.0 + p.floor_margin)
    sg = (1.0 + p.search_margin) * geff
    peak_cl = matnum.max_norm_over_interval(m.closed_loop(), m.dt)
    peak_op = matnum.max_norm_over_interval(m.A, m.dt)
    return DerivedConstants(
        S_closed=S,
        S_open=S_open,
        growth=growth,
        growth_eff=geff,
        search_growth=sg,
        search_ratio=(sg - 1.0) / (geff - 1.0),
        dist_gain=matnum.phi_integral(m.A, m.D, m.dt),
        P=P,
        Q=Q,
        chi=chi,
        nu=nu,
        nu_base=nu_base,
        peak_closed=peak_cl,
        peak_open=peak_op,
        intersample_gain=2.0 * peak_cl + peak_op,
        data_rate_bits=math.log2(float(m.n_levels) ** m.n_x + 2.0) / m.dt,
        n_levels=m.n_levels,
    )


def validate_design(m: PlantModel, p: DesignParams) -> CertificateReport:
    """Check the design inequalities; violations are data, not errors."""
    a1, a2 = check_assumptions(m)
    msgs: list[str] = []
    if not a1:
        msgs.append("closed loop A + BK is not stable over one period")
    if not a2:
        msgs.append("per-period growth is not below the grid count")

    n = m.n_levels
    geff = _growth_eff(m, p)
    psi_lhs = (1.0 + p.psi) * geff**2 / n**2
    psi_ok = psi_lhs < 1.0
    if not psi_ok:
        msgs.append(f"(1+psi)*growth_eff^2/n^2 = {psi_lhs:.6g} is not below 1")

    if a1:
        _, _, _, chi, nu_base, nu = _chi_nu(m, p)
        rho_lhs = ((n - 1) ** 2 / n**2) * chi / p.rho + psi_lhs
        rho_ok = rho_lhs < 1.0
        if not rho_ok:
            msgs.append(f"quantization term {rho_lhs:.6g} is not below 1 (rho too small)")
        nu_ok = nu < 1.0
        if not nu_ok:
            msgs.append(f"contraction factor nu = {nu:.6g} is not below 1")
    else:
        rho_ok = nu_ok = False
        nu = math.nan
        msgs.append("Lyapunov-based conditions unavailable without a stable closed loop")

    return CertificateReport(a1, a2, psi_ok, rho_ok, nu_ok, nu, msgs)


def synthesize_design(m: PlantModel, hints: DesignParams) -> DesignParams:
    """Pick (psi, rho, phi) satisfying the design inequalities with nu < 1.

    psi keeps the hint when it already fits under half the admissible cap;
    rho and phi are then sized so each remaining inequality holds with a
    factor-of-two slack.  Every other field is copied from ``hints``.
    """
    a1, a2 = check_assumptions(m)
    if not a1:
        raise ValueError("cannot synthesize: closed loop is not stable")
    if not a2:
        raise ValueError("cannot synthesize: per-period growth reaches the grid count")

    n = m.n_levels
    geff = _growth_eff(m, hints)
    psi_cap = 0.5 * (n**2 / geff**2 - 1.0)
    if psi_cap <= 0:
        raise ValueError("cannot synthesize: growth floor reaches the grid count")
    psi = min(hints.psi, psi_cap)

    base = dataclasses.replace(hints, psi=psi)
    S, Q, P, chi, _, _ = _chi_nu(m, base)
    psi_lhs = (1.0 + psi) * geff**2 / n**2
    rho = chi * ((n - 1) ** 2 / n**2) / (THETA_RHO * (1.0 - psi_lhs))

    q_min, _ = matnum.sym_eig_extremes(Q)
    _, p_max = matnum.sym_eig_extremes(P)
    nu_base = max(1.0 - q_min / (2.0 * p_max),
                  ((n - 1) ** 2 / n**2) * chi / rho + psi_lhs)
    phi = THETA_PHI * (1.0 - nu_base) * psi / ((1.0 + psi) * rho)
    return dataclasses.replace(hints, psi=psi, rho=rho, phi=phi)
