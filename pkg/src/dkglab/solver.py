"""Time evolution of the coupled Dirac / Klein-Gordon system on the torus.

The unknowns are the two half-wave spinors ``psi_plus``, ``psi_minus`` and
the real scalar ``phi``. With ``psi = psi_plus + psi_minus`` they satisfy

    (-i d/dt + s |D|) psi_s = F_s = -M beta psi_{-s} + g Pi_s(D)(phi beta psi)
    phi_tt = Laplacian(phi) - m^2 phi + g <beta psi, psi>

for ``s = +1, -1``. In Fourier variables ``d/dt psi_s = -s i |xi| psi_s + i F_s``
and the scalar is a harmonic oscillator per mode with
``omega = sqrt(|xi|^2 + m^2)``.

Internally a state is packed as one complex array of shape (10, n, n, n):
rows 0-3 hold the coefficients of ``psi_plus``, rows 4-7 those of
``psi_minus``, row 8 ``phi`` and row 9 ``phi_t``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from . import snapshot
from .algebra import DomainError
from .expint import oscillator_c, phi as phi_fn
from .fields import (
    FREQUENCY, Grid3, ScalarState, SpinorField, project_coefficients,
)

INTEGRATORS = ("etd_rk4", "strang")
EPS = 0.1
EPS_PRIME = 0.01
_BETA_DIAG = np.array([1.0, 1.0, -1.0, -1.0])


class ConfigurationError(ValueError):
    """Invalid solver parameters (exit status 2 at the command line)."""


class BlowUpError(RuntimeError):
    """Evolution produced non-finite values or runaway charge."""

    def __init__(self, message: str, last_state: "DKGState | None" = None, diagnostics=None):
        super().__init__(message)
        self.last_state = last_state
        self.diagnostics = diagnostics or []


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid3
    M: float = 0.0
    m: float = 0.0
    g: float = 1.0
    dt: float = 1e-3
    T: float = 1.0
    integrator: str = "etd_rk4"
    dealias: bool = True

    def __post_init__(self):
        for name in ("M", "m", "g"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise ConfigurationError(f"{name} must be finite and >= 0, got {val}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if self.integrator not in INTEGRATORS:
            raise ConfigurationError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    def omega_max(self) -> float:
        absx = self.grid.abs_xi[self.grid.nyquist_mask]
        return float(np.sqrt(absx.max() ** 2 + self.m**2))


@dataclass(frozen=True, eq=False)
class DKGState:
    t: float
    psi_plus: SpinorField
    psi_minus: SpinorField
    scalar: ScalarState

    @property
    def grid(self) -> Grid3:
        return self.psi_plus.grid

    @property
    def psi(self) -> SpinorField:
        return SpinorField(self.grid, self.psi_plus.coefficients() + self.psi_minus.coefficients(), FREQUENCY)

    def pack(self) -> np.ndarray:
        p, q = self.scalar.coefficients()
        return np.concatenate([self.psi_plus.coefficients(), self.psi_minus.coefficients(), p[None], q[None]])

    @classmethod
    def unpack(cls, grid: Grid3, y: np.ndarray, t: float) -> "DKGState":
        return cls(t, SpinorField(grid, y[0:4], FREQUENCY), SpinorField(grid, y[4:8], FREQUENCY),
                   ScalarState.from_coefficients(grid, y[8], y[9]))


@dataclass(frozen=True)
class IterationRecord:
    k: int
    norms: dict
    diff_norm: float


@dataclass
class PicardResult:
    records: list
    status: str
    floor: float

    @property
    def contracting(self) -> bool:
        return self.status != "non-contraction"

    def ratios(self) -> list:
        """``diff_norm_k / diff_norm_{k-1}`` for consecutive records above the floor."""
        out = []
        for a, b in zip(self.records, self.records[1:]):
            if a.diff_norm > self.floor and b.diff_norm > self.floor:
                out.append(b.diff_norm / a.diff_norm)
        return out


# ---------------------------------------------------------------------------
# data


def split_data(psi0: SpinorField) -> tuple[SpinorField, SpinorField]:
    """Return ``(Pi_+(D) psi0, Pi_-(D) psi0)``; the two halves sum to ``psi0``."""
    c = psi0.coefficients()
    plus = project_coefficients(c, psi0.grid, +1)
    return (SpinorField(psi0.grid, plus, FREQUENCY), SpinorField(psi0.grid, c - plus, FREQUENCY))


def initial_state(psi0: SpinorField, scalar0: ScalarState, t: float = 0.0) -> DKGState:
    if psi0.grid != scalar0.grid:
        raise ConfigurationError("spinor and scalar data live on different grids")
    plus, minus = split_data(psi0)
    return DKGState(t, plus, minus, scalar0)


def chadam_glassey_data(seed: int, grid: Grid3, amplitude: float = 1.0, decay: float = 3.0) -> SpinorField:
    """Random smooth spinor with ``psi1 = conj(psi4)`` and ``psi2 = -conj(psi3)``.

    Built in frequency space, where conjugation maps ``c(k)`` to ``conj(c(-k))``,
    so the constraints hold coefficient by coefficient.
    """
    rng = np.random.default_rng(seed)
    kabs = np.sqrt(np.sum(grid.k.astype(float) ** 2, axis=0))
    env = amplitude * (1.0 + kabs) ** (-decay) * grid.nyquist_mask
    lower = (rng.standard_normal((2,) + grid.shape) + 1j * rng.standard_normal((2,) + grid.shape)) * env
    c = np.empty((4,) + grid.shape, dtype=complex)
    c[2:] = lower
    c[0] = _conj_coeffs(lower[1])
    c[1] = -_conj_coeffs(lower[0])
    return SpinorField(grid, c, FREQUENCY)


def _conj_coeffs(c: np.ndarray) -> np.ndarray:
    """Coefficients of the complex conjugate field."""
    return np.conj(np.roll(np.flip(c, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1)))


def preset_data(name: str, grid: Grid3, seed: int, amplitude: float) -> tuple[SpinorField, ScalarState]:
    """Named initial data used by configuration files."""
    rng = np.random.default_rng(seed)
    kabs = np.sqrt(np.sum(grid.k.astype(float) ** 2, axis=0))
    env = (1.0 + kabs) ** (-3.0) * grid.dealias_mask
    if name == "zero":
        return SpinorField.zeros(grid), ScalarState.zeros(grid)
    if name == "chadam_glassey":
        psi = chadam_glassey_data(seed, grid, amplitude)
        return psi, _random_scalar(grid, rng, amplitude, env)
    if name == "random":
        c = (rng.standard_normal((4,) + grid.shape) + 1j * rng.standard_normal((4,) + grid.shape)) * env
        return SpinorField(grid, amplitude * c, FREQUENCY), _random_scalar(grid, rng, amplitude, env)
    if name == "rough":
        # flat spectrum on the dealiased modes, amplitude is the rms value of every field
        flat = grid.dealias_mask.astype(float)
        c = (rng.standard_normal((4,) + grid.shape) + 1j * rng.standard_normal((4,) + grid.shape)) * flat
        c *= amplitude / np.sqrt(np.sum(np.abs(c) ** 2))
        return SpinorField(grid, c, FREQUENCY), _random_scalar(grid, rng, amplitude, flat, rms=True)
    if name == "plane_wave":
        x = grid.coordinates()[0]
        spinor = np.zeros((4,) + grid.shape, dtype=complex)
        spinor[0] = amplitude * np.exp(1j * grid.dk * x)
        return SpinorField(grid, spinor), ScalarState(grid, amplitude * np.cos(grid.dk * x), np.zeros(grid.shape))
    raise ConfigurationError(f"unknown data preset {name!r}")


def _random_scalar(grid, rng, amplitude, env, rms=False):
    out = []
    for _ in range(2):
        c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * env
        u = sfft.ifftn(c, norm="forward").real
        if rms:
            u /= np.sqrt(np.mean(u**2))
        out.append(amplitude * u)
    return ScalarState(grid, out[0], out[1])


# ---------------------------------------------------------------------------
# right-hand sides


def _ifft(c):
    return sfft.ifftn(c, axes=(-3, -2, -1), norm="forward")


def _fft(u):
    return sfft.fftn(u, axes=(-3, -2, -1), norm="forward")


@dataclass(frozen=True)
class _Bilinear:
    """Quadratic products ``phi beta psi`` and ``<beta psi, psi>`` in Fourier variables."""

    grid: Grid3
    dealias: bool

    def inputs(self, psi_hat, phi_hat):
        if self.dealias:
            mask = self.grid.dealias_mask
            psi_hat, phi_hat = psi_hat * mask, phi_hat * mask
        return _ifft(psi_hat), _ifft(phi_hat).real

    def output(self, c):
        mask = self.grid.dealias_mask if self.dealias else self.grid.nyquist_mask
        return c * mask

    def products(self, psi_hat, phi_hat):
        psi, phi = self.inputs(psi_hat, phi_hat)
        bpsi = _BETA_DIAG[:, None, None, None] * psi
        source = self.output(_fft(phi * bpsi))
        dens = np.sum((np.conj(psi) * bpsi).real, axis=0)
        return source, self.output(_fft(dens))


def _nonlinear(y: np.ndarray, grid: Grid3, M: float, g: float, dealias: bool,
               scalar_mass: float = 0.0) -> np.ndarray:
    """Packed ``i F_+``, ``i F_-`` and the scalar forcing.

    ``scalar_mass`` moves ``-m^2 phi`` into the forcing (massless propagator).
    """
    out = np.zeros_like(y)
    bil = _Bilinear(grid, dealias)
    beta = _BETA_DIAG[:, None, None, None]
    f_plus = -M * beta * y[4:8]
    f_minus = -M * beta * y[0:4]
    if g != 0.0:
        source, dens = bil.products(y[0:4] + y[4:8], y[8])
        proj = project_coefficients(source, grid, +1)
        f_plus = f_plus + g * proj
        f_minus = f_minus + g * (source - proj)
        out[9] = g * dens
    out[0:4] = 1j * f_plus
    out[4:8] = 1j * f_minus
    if scalar_mass:
        out[9] -= scalar_mass**2 * y[8]
    return out


def dirac_rhs(sign, state: DKGState, cfg: SolverConfig) -> SpinorField:
    """``F_sign = -M beta psi_{-sign} + g Pi_sign(D)(phi beta psi)``."""
    from .algebra import Sign

    s = Sign.parse(sign)
    n = _nonlinear(state.pack(), cfg.grid, cfg.M, cfg.g, cfg.dealias)
    rows = slice(0, 4) if s == Sign.PLUS else slice(4, 8)
    return SpinorField(cfg.grid, -1j * n[rows], FREQUENCY)


def kg_rhs(state: DKGState, cfg: SolverConfig) -> np.ndarray:
    """Real source ``g <beta psi, psi>`` of the scalar equation (physical values)."""
    y = state.pack()
    _, dens = _Bilinear(cfg.grid, cfg.dealias).products(y[0:4] + y[4:8], y[8])
    return cfg.g * _ifft(dens).real


def density(psi: SpinorField) -> np.ndarray:
    """Pointwise ``|psi1|^2 + |psi2|^2 - |psi3|^2 - |psi4|^2``."""
    u = psi.physical()
    a = np.abs(u) ** 2
    return a[0] + a[1] - a[2] - a[3]


# ---------------------------------------------------------------------------
# linear flow and integrator coefficients


class _Operator:
    """Mode-wise linear map on packed states: diagonal on spinors, 2x2 on the scalar."""

    def __init__(self, d_plus, d_minus, a, b, c, d):
        self.d_plus, self.d_minus = d_plus, d_minus
        self.a, self.b, self.c, self.d = a, b, c, d

    def __call__(self, y):
        out = np.empty_like(y)
        out[0:4] = self.d_plus * y[0:4]
        out[4:8] = self.d_minus * y[4:8]
        out[8] = self.a * y[8] + self.b * y[9]
        out[9] = self.c * y[8] + self.d * y[9]
        return out

    def forcing_only(self, y):
        """Apply to a packed vector whose ``phi`` row vanishes."""
        out = np.empty_like(y)
        out[0:4] = self.d_plus * y[0:4]
        out[4:8] = self.d_minus * y[4:8]
        out[8] = self.b * y[9]
        out[9] = self.d * y[9]
        return out

    def combine(self, other, alpha=1.0, beta=1.0):
        return _Operator(*(alpha * u + beta * v for u, v in zip(self._parts(), other._parts())))

    def _parts(self):
        return (self.d_plus, self.d_minus, self.a, self.b, self.c, self.d)


def _phi_operator(k: int, grid: Grid3, h: float, omega: np.ndarray) -> _Operator:
    """``phi_k(h L)`` for the free generator ``L``."""
    absx = grid.abs_xi
    d_plus = phi_fn(k, -1j * h * absx)
    d_minus = phi_fn(k, 1j * h * absx)
    z = omega * h
    ck = oscillator_c(k, z)
    ck1 = oscillator_c(k + 1, z)
    return _Operator(d_plus, d_minus, ck, h * ck1, -h * omega**2 * ck1, ck)


@lru_cache(maxsize=8)
def _etd_coefficients(grid: Grid3, h: float, m: float):
    omega = np.sqrt(grid.abs_xi**2 + m * m)
    E = _phi_operator(0, grid, h, omega)
    E2 = _phi_operator(0, grid, h / 2, omega)
    Q = _phi_operator(1, grid, h / 2, omega)
    p1, p2, p3 = (_phi_operator(k, grid, h, omega) for k in (1, 2, 3))
    f1 = p1.combine(p2, 1, -3).combine(p3, 1, 4)
    f2 = p2.combine(p3, 1, -2)
    f3 = p3.combine(p2, 4, -1)
    return E, E2, Q, f1, f2, f3


def linear_flow(y: np.ndarray, grid: Grid3, t: float, m: float) -> np.ndarray:
    omega = np.sqrt(grid.abs_xi**2 + m * m)
    return _phi_operator(0, grid, t, omega)(y)


def _etd_rk4(y, grid, cfg: SolverConfig, h: float):
    E, E2, Q, f1, f2, f3 = _etd_coefficients(grid, h, cfg.m)
    N = lambda v: _nonlinear(v, grid, cfg.M, cfg.g, cfg.dealias)  # noqa: E731
    ny = N(y)
    ey2 = E2(y)
    a = ey2 + (h / 2) * Q.forcing_only(ny)
    na = N(a)
    b = ey2 + (h / 2) * Q.forcing_only(na)
    nb = N(b)
    c = E2(a) + (h / 2) * Q.forcing_only(2 * nb - ny)
    nc = N(c)
    return E(y) + h * (f1.forcing_only(ny) + 2 * f2.forcing_only(na + nb) + f3.forcing_only(nc))


def _strang(y, grid, cfg: SolverConfig, h: float):
    E2 = _etd_coefficients(grid, h, cfg.m)[1]
    N = lambda v: _nonlinear(v, grid, cfg.M, cfg.g, cfg.dealias)  # noqa: E731
    y = E2(y)
    k1 = N(y)
    k2 = N(y + (h / 2) * k1)
    k3 = N(y + (h / 2) * k2)
    k4 = N(y + h * k3)
    y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return E2(y)


_STEPPERS = {"etd_rk4": _etd_rk4, "strang": _strang}


def _check_resolution(cfg: SolverConfig):
    wmax = cfg.omega_max()
    if cfg.dt * wmax > 1.0:
        raise ConfigurationError(
            f"dt={cfg.dt} does not resolve the fastest linear frequency {wmax:.4g} "
            f"(need dt * omega_max <= 1)")


def step(state: DKGState, cfg: SolverConfig) -> DKGState:
    """Advance one time step of size ``cfg.dt``."""
    _check_resolution(cfg)
    y = _STEPPERS[cfg.integrator](state.pack(), cfg.grid, cfg, cfg.dt)
    return DKGState.unpack(cfg.grid, y, state.t + cfg.dt)


# ---------------------------------------------------------------------------
# diagnostics


def charge(psi: SpinorField) -> float:
    """Discrete ``int |psi|^2 dx``."""
    u = psi.physical()
    return float(psi.grid.cell_volume * np.sum(np.abs(u) ** 2))


def _charge_packed(y, grid):
    return float(grid.volume * np.sum(np.abs(y[0:4] + y[4:8]) ** 2))


def _dirac_kinetic(psi_hat, grid):
    """``int Im(psi^dagger alpha . grad psi) dx``, equal to ``<psi, alpha . D psi>``."""
    from .fields import _sigma_dot_swap

    absx = grid.abs_xi
    xi = grid.xi
    # alpha . xi applied through the unit-direction helper, rescaled by |xi|
    inv = np.divide(1.0, absx, out=np.zeros_like(absx), where=absx > 0)
    ad = _sigma_dot_swap(psi_hat, xi[0] * inv, xi[1] * inv, xi[2] * inv) * absx
    return float(grid.volume * np.sum((np.conj(psi_hat) * ad).real))


def _scalar_energy(p, q, grid, m):
    w = grid.abs_xi**2 + m * m
    return 0.5 * float(grid.volume * np.sum(np.abs(q) ** 2 + w * np.abs(p) ** 2))


def energy(state: DKGState, cfg: SolverConfig) -> float:
    """Integral of ``Im(psi^+ alpha^j d_j psi) - (M - g phi) psi^+ beta psi - (phi_t^2 + |grad phi|^2 + m^2 phi^2)/2``.

    Evaluated with spectral derivatives on the raw (undealiased) fields.
    This functional is not conserved by the evolution; see :func:`hamiltonian`.
    """
    grid = cfg.grid
    psi_hat = state.psi_plus.coefficients() + state.psi_minus.coefficients()
    p, q = state.scalar.coefficients()
    rho = density(SpinorField(grid, psi_hat, FREQUENCY))
    mass_term = float(grid.cell_volume * np.sum((cfg.M - cfg.g * state.scalar.phi) * rho))
    return _dirac_kinetic(psi_hat, grid) - mass_term - _scalar_energy(p, q, grid, cfg.m)


def hamiltonian(state: DKGState, cfg: SolverConfig) -> float:
    """Conserved functional of the discrete evolution.

    ``int Im(psi^+ alpha . grad psi) + M psi^+ beta psi - g phi <beta psi, psi>
    + (phi_t^2 + |grad phi|^2 + m^2 phi^2)/2``, with the coupling term built
    from the same dealiased fields as the nonlinearity.
    """
    return _hamiltonian_packed(state.pack(), cfg)


def _hamiltonian_packed(y, cfg: SolverConfig) -> float:
    grid = cfg.grid
    psi_hat = y[0:4] + y[4:8]
    u = _ifft(psi_hat)
    a = np.abs(u) ** 2
    mass_term = cfg.M * float(grid.cell_volume * np.sum(a[0] + a[1] - a[2] - a[3]))
    coupling = 0.0
    if cfg.g != 0.0:
        psi_m, phi_m = _Bilinear(grid, cfg.dealias).inputs(psi_hat, y[8])
        am = np.abs(psi_m) ** 2
        coupling = cfg.g * float(grid.cell_volume * np.sum(phi_m * (am[0] + am[1] - am[2] - am[3])))
    return _dirac_kinetic(psi_hat, grid) + mass_term - coupling + _scalar_energy(y[8], y[9], grid, cfg.m)


def range_defect(state: DKGState) -> float:
    """Relative distance of the half-wave spinors from their projection ranges.

    The zero mode is excluded from the range test (both projections equal
    ``I/2`` there); instead it must carry equal halves.
    """
    grid = state.grid
    worst = 0.0
    cp, cm = state.psi_plus.coefficients(), state.psi_minus.coefficients()
    nonzero = grid.abs_xi > 0
    for sign, c in ((+1, cp), (-1, cm)):
        ref = np.sqrt(np.sum(np.abs(c) ** 2))
        if ref == 0:
            continue
        diff = (project_coefficients(c, grid, sign) - c) * nonzero
        worst = max(worst, float(np.sqrt(np.sum(np.abs(diff) ** 2)) / ref))
    ref = max(np.sqrt(np.sum(np.abs(cp) ** 2 + np.abs(cm) ** 2)), 1e-300)
    zero_gap = np.abs(cp[:, 0, 0, 0] - cm[:, 0, 0, 0])
    return max(worst, float(np.sqrt(np.sum(zero_gap**2)) / ref))


def _sobolev_packed(c, grid, s):
    w2 = (1.0 + grid.abs_xi) ** (2 * s)
    mass = np.abs(c) ** 2
    if mass.ndim == 4:
        mass = mass.sum(axis=0)
    return float(np.sqrt(grid.volume * np.sum(w2 * mass)))


def solution_norms(y, grid, eps: float = EPS) -> dict:
    """``H^eps`` spinor norms, ``H^(1/2+eps)`` for phi and ``H^(-1/2+eps)`` for phi_t."""
    return {
        "psi_plus": _sobolev_packed(y[0:4], grid, eps),
        "psi_minus": _sobolev_packed(y[4:8], grid, eps),
        "phi": _sobolev_packed(y[8], grid, 0.5 + eps),
        "phi_t": _sobolev_packed(y[9], grid, -0.5 + eps),
    }


DIAGNOSTIC_COLUMNS = ("t", "charge", "energy", "density_min", "density_max",
                      "norm_psi_plus", "norm_psi_minus", "norm_phi", "hamiltonian")


def diagnostics(state: DKGState, cfg: SolverConfig) -> dict:
    y = state.pack()
    rho = density(state.psi)
    norms = solution_norms(y, cfg.grid)
    return {
        "t": state.t,
        "charge": _charge_packed(y, cfg.grid),
        "energy": energy(state, cfg),
        "density_min": float(rho.min()),
        "density_max": float(rho.max()),
        "norm_psi_plus": norms["psi_plus"],
        "norm_psi_minus": norms["psi_minus"],
        "norm_phi": norms["phi"],
        "hamiltonian": _hamiltonian_packed(y, cfg),
    }


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def relative_drift(self, name: str) -> float:
        vals = self.column(name)
        ref = abs(vals[0]) if vals[0] != 0 else 1.0
        return float(np.max(np.abs(vals - vals[0])) / ref)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(DIAGNOSTIC_COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(r[c])) for c in DIAGNOSTIC_COLUMNS])
        return buf.getvalue()

    @property
    def final(self) -> DKGState:
        return self.states[-1]


CHARGE_GROWTH_LIMIT = 1e6


def solve(cfg: SolverConfig, data, stride: int = 1, keep_states: bool = True,
          snapshot_dir=None, snapshot_stride: int | None = None) -> Trajectory:
    """Evolve ``data = (psi0, scalar0)`` (or a :class:`DKGState`) to time ``cfg.T``.

    Diagnostics are recorded every ``stride`` steps and at the final time;
    states at the same times are kept when ``keep_states`` is set (the final
    state is always kept).
    """
    state = data if isinstance(data, DKGState) else initial_state(*data)
    if state.grid != cfg.grid:
        raise ConfigurationError("data grid does not match the configuration grid")
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    _check_resolution(cfg)
    grid = cfg.grid
    stepper = _STEPPERS[cfg.integrator]
    traj = Trajectory()
    snap_every = snapshot_stride or stride
    y = state.pack()
    q0 = _charge_packed(y, grid)
    t0 = state.t

    def snap(st, idx):
        if snapshot_dir is not None and idx % snap_every == 0:
            snapshot.write(Path(snapshot_dir) / f"snap_{idx:06d}.dkg", st.psi, st.scalar)

    def record(st, idx):
        traj.rows.append(diagnostics(st, cfg))
        if keep_states or idx == cfg.n_steps:
            traj.states.append(st)
        snap(st, idx)

    record(state, 0)
    healthy = state
    for i in range(1, cfg.n_steps + 1):
        y = stepper(y, grid, cfg, cfg.dt)
        t = t0 + i * cfg.dt
        q = _charge_packed(y, grid) if np.all(np.isfinite(y)) else math.inf
        if not math.isfinite(q) or q > CHARGE_GROWTH_LIMIT * max(q0, 1e-300) and q0 > 0:
            raise BlowUpError(f"blow-up detected at t={t:.6g} (step {i})", healthy, traj.rows)
        if i % stride == 0 or i == cfg.n_steps:
            healthy = DKGState.unpack(grid, y, t)
            record(healthy, i)
        elif snapshot_dir is not None and i % snap_every == 0:
            snap(DKGState.unpack(grid, y, t), i)
    return traj


# ---------------------------------------------------------------------------
# Picard iteration


@lru_cache(maxsize=8)
def _picard_coefficients(grid: Grid3, h: float):
    omega = grid.abs_xi
    return tuple(_phi_operator(k, grid, h, omega) for k in (0, 1, 2))


def _duhamel(y0: np.ndarray, forcing: np.ndarray | None, grid: Grid3, h: float) -> np.ndarray:
    """Massless linear flow from ``y0`` with piecewise-linear forcing on the time nodes.

    ``forcing`` has shape (n_nodes, 10, n, n, n) with zero ``phi`` rows; each
    interval is integrated exactly.
    """
    E, P1, P2 = _picard_coefficients(grid, h)
    n_nodes = forcing.shape[0]
    out = np.empty_like(forcing)
    out[0] = y0
    for j in range(n_nodes - 1):
        fj, fk = forcing[j], forcing[j + 1]
        out[j + 1] = E(out[j]) + h * (P1.forcing_only(fj) + P2.forcing_only(fk - fj))
    return out


def _distance(a: np.ndarray, b: np.ndarray, grid: Grid3, eps: float) -> float:
    worst = 0.0
    for j in range(a.shape[0]):
        norms = solution_norms(a[j] - b[j], grid, eps)
        worst = max(worst, sum(norms.values()))
    return worst


def picard_iterate(cfg: SolverConfig, data, k_max: int = 10, eps: float = EPS,
                   floor: float = 1e-12) -> PicardResult:
    """Iterate the Duhamel map with mass terms kept in the sources.

    Iterate 0 is the free evolution of the data; iterate k+1 is driven by
    sources built from iterate k. Record k holds ``diff_norm`` = distance
    between iterates k+1 and k in ``sup_t`` of the summed solution norms.
    Iteration stops early once ``diff_norm`` falls below ``floor`` times the
    iterate size, or when it grows three times in a row.
    """
    if cfg.T > 1:
        raise ConfigurationError(f"Picard mode requires T <= 1, got {cfg.T}")
    if k_max < 1:
        raise ConfigurationError("k_max must be >= 1")
    _check_resolution(cfg)
    state = data if isinstance(data, DKGState) else initial_state(*data)
    grid = cfg.grid
    h = cfg.dt
    n_nodes = cfg.n_steps + 1
    y0 = state.pack()
    zero_forcing = np.zeros((n_nodes,) + y0.shape, dtype=complex)
    current = _duhamel(y0, zero_forcing, grid, h)
    records = []
    status = "contracting"
    growth = 0
    for k in range(k_max):
        forcing = np.stack([_nonlinear(current[j], grid, cfg.M, cfg.g, cfg.dealias, scalar_mass=cfg.m)
                            for j in range(n_nodes)])
        nxt = _duhamel(y0, forcing, grid, h)
        diff = _distance(nxt, current, grid, eps)
        size = max(_distance(nxt, np.zeros_like(nxt), grid, eps), 1e-300)
        norms = solution_norms(current[-1], grid, eps)
        records.append(IterationRecord(k, norms, diff))
        current = nxt
        if len(records) > 1 and diff > records[-2].diff_norm:
            growth += 1
        else:
            growth = 0
        if not np.all(np.isfinite(nxt)) or growth >= 3:
            status = "non-contraction"
            break
        if diff <= floor * size:
            status = "converged"
            break
    return PicardResult(records, status, floor * max(_distance(current, np.zeros_like(current), grid, eps), 1e-300))


def picard_final_state(cfg: SolverConfig, data, k_max: int = 30) -> DKGState:
    """Final-time state of the Picard fixed point (for cross-checks against :func:`solve`)."""
    state = data if isinstance(data, DKGState) else initial_state(*data)
    grid = cfg.grid
    n_nodes = cfg.n_steps + 1
    y0 = state.pack()
    current = _duhamel(y0, np.zeros((n_nodes,) + y0.shape, dtype=complex), grid, cfg.dt)
    for _ in range(k_max):
        forcing = np.stack([_nonlinear(current[j], grid, cfg.M, cfg.g, cfg.dealias, scalar_mass=cfg.m)
                            for j in range(n_nodes)])
        current = _duhamel(y0, forcing, grid, cfg.dt)
    return DKGState.unpack(grid, current[-1], state.t + cfg.n_steps * cfg.dt)


# ---------------------------------------------------------------------------
# scaling symmetry


def _rescale(state: DKGState, grid: Grid3, lam: float) -> DKGState:
    """Massless rescaling onto ``grid`` (same n, box scaled by ``lam``)."""
    if lam == 1.0 and grid == state.grid:
        return state  # skip the pack/unpack transform round trip
    y = state.pack().copy()
    y[0:8] *= lam**-1.5
    y[8] *= lam**-1.0
    y[9] *= lam**-2.0
    return DKGState.unpack(grid, y, state.t * lam)


def scaling_check(cfg: SolverConfig, data, L_factor: float = 2.0) -> dict:
    """Compare a solution with the solution from rescaled data on the scaled box.

    Same number of grid points, box ``L * L_factor``, time step and final
    time scaled by ``L_factor``. Returns the relative discrepancy of the
    rescaled final states.
    """
    if cfg.M != 0 or cfg.m != 0:
        raise ConfigurationError("scaling symmetry requires M = m = 0")
    lam = float(L_factor)
    if not (lam > 0 and math.log2(lam).is_integer()):
        raise ConfigurationError(f"L_factor must be a power of two, got {L_factor}")
    state = data if isinstance(data, DKGState) else initial_state(*data)
    big_grid = Grid3(cfg.grid.n, cfg.grid.L * lam)
    big_cfg = replace(cfg, grid=big_grid, dt=cfg.dt * lam, T=cfg.T * lam)
    small = solve(cfg, state, stride=cfg.n_steps, keep_states=False).final
    big = solve(big_cfg, _rescale(state, big_grid, lam), stride=big_cfg.n_steps, keep_states=False).final
    expected = _rescale(small, big_grid, lam).pack()
    got = big.pack()
    num = float(np.sqrt(np.sum(np.abs(got - expected) ** 2)))
    den = max(float(np.sqrt(np.sum(np.abs(expected) ** 2))), 1e-300)
    return {
        "L_factor": lam,
        "n": cfg.grid.n,
        "steps": cfg.n_steps,
        "discrepancy": num / den,
        "final_time_original": small.t,
        "final_time_rescaled": big.t,
    }
