"""Thermodynamic model functions for the four-phase, three-component system.

Phase index 3 is the liquid.  All functions here are pure; the ``_nb``
variants are numba-compiled cores shared with the sweep kernels, the public
functions are convenience wrappers taking and returning numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

N_PHASES = 4
N_COMP = 2  # independent components (K - 1)
LIQUID = 3
OBSTACLE_PREFACTOR = 16.0 / np.pi**2


class ConfigError(ValueError):
    """Raised for parameter sets that violate a model invariant."""


def _as(arr, shape, name):
    try:
        a = np.array(arr, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric array ({exc})") from exc
    if a.shape != shape:
        raise ConfigError(f"{name}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{name}: non-finite entries")
    return a


@dataclass
class ModelParams:
    epsilon: float
    tau: np.ndarray
    gamma: np.ndarray
    diffusivity: np.ndarray  # (phase, component)
    mobility_weight: str = "phi"  # or "h"
    at_phi_tol: float = 1e-9
    at_grad_tol: float = 1e-12

    def __post_init__(self):
        self.tau = _as(self.tau, (N_PHASES,), "tau")
        self.gamma = _as(self.gamma, (N_PHASES, N_PHASES), "gamma")
        self.diffusivity = _as(self.diffusivity, (N_PHASES, N_COMP), "diffusivity")
        self.validate()

    def validate(self):
        g = self.gamma
        if not np.array_equal(g, g.T):
            raise ConfigError("gamma must be symmetric")
        if np.any(np.diag(g) != 0.0):
            raise ConfigError("gamma must have a zero diagonal")
        off = g[~np.eye(N_PHASES, dtype=bool)]
        if np.any(off <= 0.0):
            raise ConfigError("gamma off-diagonal entries must be positive")
        if np.any(self.tau <= 0.0):
            raise ConfigError("tau must be positive")
        if not self.epsilon > 0.0:
            raise ConfigError("epsilon must be positive")
        if np.any(self.diffusivity < 0.0):
            raise ConfigError("diffusivities must be non-negative")
        if np.any(self.diffusivity[LIQUID] <= 0.0):
            raise ConfigError("liquid diffusivities must be positive")
        if self.mobility_weight not in ("phi", "h"):
            raise ConfigError(f"mobility_weight must be 'phi' or 'h', got {self.mobility_weight!r}")


@dataclass
class PhaseThermo:
    """Parabolic grand-potential data per phase and independent component.

    ``curvature`` is A, ``c_eut`` the equilibrium concentration at the
    eutectic temperature, ``slope`` dc/dT and ``latent`` the coefficient of
    the driving offset ``latent * (T - T_eut) / T_eut``.
    """

    curvature: np.ndarray
    c_eut: np.ndarray
    slope: np.ndarray
    latent: np.ndarray

    def __post_init__(self):
        self.curvature = _as(self.curvature, (N_PHASES, N_COMP), "curvature")
        self.c_eut = _as(self.c_eut, (N_PHASES, N_COMP), "c_eut")
        self.slope = _as(self.slope, (N_PHASES, N_COMP), "slope")
        self.latent = _as(self.latent, (N_PHASES,), "latent")
        if np.any(self.curvature <= 0.0):
            raise ConfigError("parabola curvatures must be positive")


@dataclass
class TemperatureSchedule:
    T_eut: float
    G: float = 0.0
    v: float = 0.0
    z0: float = 0.0

    def __post_init__(self):
        if not self.T_eut > 0.0:
            raise ConfigError("T_eut must be positive")

    @property
    def dT_dt(self) -> float:
        return -self.G * self.v


@dataclass
class SliceCache:
    """Temperature-only quantities for one z-slice at one time."""

    z: float
    t: float
    T: float
    c_hat: np.ndarray = field(repr=False)
    offset: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, thermo: PhaseThermo, sched: TemperatureSchedule, z: float, t: float):
        T = temperature_at(sched, z, t)
        c_hat = thermo.c_eut + thermo.slope * (T - sched.T_eut)
        offset = thermo.latent * (T - sched.T_eut) / sched.T_eut
        return cls(z, t, T, c_hat, offset)

    def valid_for(self, z: float, t: float) -> bool:
        return self.z == z and self.t == t


def temperature_at(sched: TemperatureSchedule, z: float, t: float) -> float:
    return sched.T_eut + sched.G * (z - sched.z0 - sched.v * t)


# ---------------------------------------------------------------------------
# numba cores (scratch-array style so they can run inside cell loops)


@njit(cache=True, nogil=True)
def h_weights_nb(phi, h):
    s = 0.0
    for a in range(N_PHASES):
        s += phi[a] * phi[a]
    for a in range(N_PHASES):
        h[a] = phi[a] * phi[a] / s
    return s


@njit(cache=True, nogil=True)
def slice_values_nb(T, T_eut, c_eut, slope, latent, c_hat, offset):
    """Fill T-dependent equilibrium concentrations and driving offsets."""
    dT = T - T_eut
    for a in range(N_PHASES):
        for i in range(N_COMP):
            c_hat[a, i] = c_eut[a, i] + slope[a, i] * dT
        offset[a] = latent[a] * dT / T_eut


@njit(cache=True, nogil=True)
def psi_phase_nb(a, mu0, mu1, curv, c_hat, offset):
    p = -(mu0 * mu0 / (4.0 * curv[a, 0]) + mu0 * c_hat[a, 0])
    p -= mu1 * mu1 / (4.0 * curv[a, 1]) + mu1 * c_hat[a, 1]
    return p + offset[a]


@njit(cache=True, nogil=True)
def conc_nb(phi, mu0, mu1, curv, c_hat, h, out):
    """Mixture concentration c_i = sum_a h_a (mu_i / 2A + c_hat); returns nothing."""
    h_weights_nb(phi, h)
    c0 = 0.0
    c1 = 0.0
    for a in range(N_PHASES):
        c0 += h[a] * (mu0 / (2.0 * curv[a, 0]) + c_hat[a, 0])
        c1 += h[a] * (mu1 / (2.0 * curv[a, 1]) + c_hat[a, 1])
    out[0] = c0
    out[1] = c1


@njit(cache=True, nogil=True)
def susceptibility_nb(phi, curv, h, out):
    h_weights_nb(phi, h)
    x0 = 0.0
    x1 = 0.0
    for a in range(N_PHASES):
        x0 += h[a] / (2.0 * curv[a, 0])
        x1 += h[a] / (2.0 * curv[a, 1])
    out[0] = x0
    out[1] = x1


@njit(cache=True, nogil=True)
def mobility_nb(phi, curv, diff, use_h, h, out):
    w = phi
    if use_h:
        h_weights_nb(phi, h)
        w = h
    m0 = 0.0
    m1 = 0.0
    for a in range(N_PHASES):
        m0 += w[a] * diff[a, 0] / (2.0 * curv[a, 0])
        m1 += w[a] * diff[a, 1] / (2.0 * curv[a, 1])
    out[0] = m0
    out[1] = m1


# ---------------------------------------------------------------------------
# public wrappers


def h_interp(phi):
    """Return (h, dh) with h_a = phi_a^2 / sum phi^2 and dh[a, b] = dh_a/dphi_b."""
    phi = np.asarray(phi, dtype=np.float64)
    s = float(np.dot(phi, phi))
    h = phi * phi / s
    dh = 2.0 * np.diag(phi) / s - 2.0 * np.outer(phi * phi, phi) / s**2
    return h, dh


def equilibrium_conc(thermo: PhaseThermo, sched: TemperatureSchedule, T: float) -> np.ndarray:
    return thermo.c_eut + thermo.slope * (T - sched.T_eut)


def grand_potential_phase(alpha: int, mu, T: float, thermo: PhaseThermo, sched: TemperatureSchedule):
    """Parabolic grand potential of one phase and its concentration at (mu, T)."""
    mu = np.asarray(mu, dtype=np.float64)
    A = thermo.curvature[alpha]
    c_hat = thermo.c_eut[alpha] + thermo.slope[alpha] * (T - sched.T_eut)
    c = mu / (2.0 * A) + c_hat
    psi = -np.sum(mu * mu / (4.0 * A) + mu * c_hat) + thermo.latent[alpha] * (T - sched.T_eut) / sched.T_eut
    return float(psi), c


def grand_potentials(mu, T, thermo, sched) -> np.ndarray:
    return np.array([grand_potential_phase(a, mu, T, thermo, sched)[0] for a in range(N_PHASES)])


def driving_force_deriv(phi, mu, T, thermo: PhaseThermo, sched: TemperatureSchedule) -> np.ndarray:
    """d/dphi_a of sum_b psi_b h_b."""
    psi = grand_potentials(mu, T, thermo, sched)
    _, dh = h_interp(phi)
    return dh.T @ psi


def obstacle_potential(phi, gamma) -> float:
    phi = np.asarray(phi, dtype=np.float64)
    return float(OBSTACLE_PREFACTOR * 0.5 * phi @ np.asarray(gamma) @ phi)


def obstacle_deriv(phi, gamma) -> np.ndarray:
    return OBSTACLE_PREFACTOR * (np.asarray(gamma) @ np.asarray(phi, dtype=np.float64))


def gradient_face_flux(phi_lo, phi_hi, gamma, dx) -> np.ndarray:
    """Normal component of da/d(grad phi_a) on the face between two cells."""
    pb = 0.5 * (np.asarray(phi_lo) + np.asarray(phi_hi))
    d = (np.asarray(phi_hi) - np.asarray(phi_lo)) / dx
    out = np.zeros(N_PHASES)
    for a in range(N_PHASES):
        for b in range(N_PHASES):
            if b != a:
                out[a] -= 2.0 * gamma[a, b] * pb[b] * (pb[a] * d[b] - pb[b] * d[a])
    return out


def gradient_energy_terms(center, neighbors, gamma, dx) -> np.ndarray:
    """da/dphi_a - div(da/dgrad phi_a) on a D3C7 neighbourhood.

    ``neighbors`` is ordered (x-, x+, y-, y+, z-, z+), each a phase vector.
    """
    c = np.asarray(center, dtype=np.float64)
    nb = np.asarray(neighbors, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    grad = np.stack([(nb[2 * d + 1] - nb[2 * d]) / (2.0 * dx) for d in range(3)], axis=1)  # (phase, dim)
    dadphi = np.zeros(N_PHASES)
    for a in range(N_PHASES):
        for b in range(N_PHASES):
            if b != a:
                q = c[a] * grad[b] - c[b] * grad[a]
                dadphi[a] += 2.0 * gamma[a, b] * np.dot(q, grad[b])
    div = np.zeros(N_PHASES)
    for d in range(3):
        fp = gradient_face_flux(c, nb[2 * d + 1], gamma, dx)
        fm = gradient_face_flux(nb[2 * d], c, gamma, dx)
        div += (fp - fm) / dx
    return dadphi - div


def susceptibility(phi, thermo: PhaseThermo) -> np.ndarray:
    h, _ = h_interp(phi)
    return np.diag(h @ (1.0 / (2.0 * thermo.curvature)))


def susceptibility_inverse(phi, thermo: PhaseThermo) -> np.ndarray:
    return np.diag(1.0 / np.diag(susceptibility(phi, thermo)))


def concentration(phi, mu, T, thermo, sched) -> np.ndarray:
    h, _ = h_interp(phi)
    cs = np.array([grand_potential_phase(a, mu, T, thermo, sched)[1] for a in range(N_PHASES)])
    return h @ cs


def conc_partials(phi, mu, T, thermo: PhaseThermo, sched: TemperatureSchedule):
    """Return (dc/dphi with shape (2, N), dc/dT with shape (2,))."""
    h, dh = h_interp(phi)
    cs = np.array([grand_potential_phase(a, mu, T, thermo, sched)[1] for a in range(N_PHASES)])
    return cs.T @ dh, h @ thermo.slope


def mobility(phi, thermo: PhaseThermo, params: ModelParams, T: float | None = None) -> np.ndarray:
    """Diagonal mobility; T is accepted for interface symmetry but unused."""
    phi = np.asarray(phi, dtype=np.float64)
    w = h_interp(phi)[0] if params.mobility_weight == "h" else phi
    return np.diag(w @ (params.diffusivity / (2.0 * thermo.curvature)))


def stable_dt(params: ModelParams, thermo: PhaseThermo, sched: TemperatureSchedule, dx: float,
              T_max: float | None = None, safety: float = 0.5) -> float:
    """Explicit-Euler step from the diffusive limits of both evolution equations."""
    if not 0.0 < safety <= 1.0:
        raise ConfigError(f"dt safety factor must lie in (0, 1], got {safety!r}")
    m_max = float(np.max(params.diffusivity / (2.0 * thermo.curvature)))
    a2_max = float(np.max(2.0 * thermo.curvature))
    T = sched.T_eut if T_max is None else T_max
    dt_mu = dx * dx / (6.0 * m_max * a2_max)
    dt_phi = float(np.min(params.tau)) * dx * dx / (12.0 * float(np.max(params.gamma)) * T)
    return safety * min(dt_mu, dt_phi)
