"""Spinor and scalar fields on the periodic box [0, L)^3.

Conventions
-----------
Grid points ``x = (L/n) * j``, frequencies ``xi = (2 pi / L) * k`` with
integer ``k`` in ``[-n/2, n/2)`` (numpy FFT ordering). The forward
transform returns coefficients ``c_k = n^-3 sum_x u(x) exp(-i xi.x)`` and
the inverse sums the Fourier series, so Parseval reads

    (L/n)^3 sum_x |u(x)|^2 = L^3 sum_k |c_k|^2.

The Nyquist row ``k = -n/2`` of every axis is zeroed whenever a field is
built. Sobolev weights use ``<xi> = 1 + |xi|``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .algebra import ALPHA, DomainError, Sign, alpha_dot

PHYSICAL = "physical"
FREQUENCY = "frequency"


class UsageError(ValueError):
    """Raised when a field is used in the wrong representation or grid."""


def _fftn(a, axes=(-3, -2, -1)):
    return sfft.fftn(a, axes=axes, norm="forward")


def _ifftn(a, axes=(-3, -2, -1)):
    return sfft.ifftn(a, axes=axes, norm="forward")


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid with ``n`` points per axis on a box of side ``L``."""

    n: int
    L: float = 2 * np.pi

    def __post_init__(self):
        n = self.n
        if n < 4 or n & (n - 1):
            raise DomainError(f"grid size must be a power of two >= 4, got {n}")
        if not self.L > 0:
            raise DomainError(f"box length must be positive, got {self.L}")

    @property
    def shape(self):
        return (self.n,) * 3

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dk(self) -> float:
        return 2 * np.pi / self.L

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def k(self) -> np.ndarray:
        """Integer wavenumbers, shape (3, n, n, n)."""
        return _tables(self.n, self.L)[0]

    @property
    def xi(self) -> np.ndarray:
        """Physical frequencies, shape (3, n, n, n)."""
        return _tables(self.n, self.L)[1]

    @property
    def abs_xi(self) -> np.ndarray:
        return _tables(self.n, self.L)[2]

    @property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes kept (no component equal to -n/2)."""
        return _tables(self.n, self.L)[3]

    @property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every ``|k_j| < n/3``."""
        return _tables(self.n, self.L)[4]

    def coordinates(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    def max_frequency(self) -> float:
        return float(self.abs_xi.max())


@lru_cache(maxsize=16)
def _tables(n, L):
    k1 = np.fft.fftfreq(n, 1.0 / n)
    k = np.stack(np.meshgrid(k1, k1, k1, indexing="ij"))
    xi = (2 * np.pi / L) * k
    abs_xi = np.sqrt(np.sum(xi**2, axis=0))
    nyq = np.all(k != -n // 2, axis=0)
    dealias = np.all(np.abs(k) < n / 3, axis=0)
    for a in (k, xi, abs_xi, nyq, dealias):
        a.setflags(write=False)
    return k, xi, abs_xi, nyq, dealias


class _GridField:
    """Shared machinery: values carry optional leading component axes."""

    grid: Grid3
    values: np.ndarray
    rep: str

    def _check(self):
        if self.rep not in (PHYSICAL, FREQUENCY):
            raise UsageError(f"unknown representation {self.rep!r}")
        if self.values.shape[-3:] != self.grid.shape:
            raise UsageError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    def coefficients(self) -> np.ndarray:
        return self.values if self.rep == FREQUENCY else _fftn(self.values)

    def physical(self) -> np.ndarray:
        return self.values if self.rep == PHYSICAL else _ifftn(self.values)

    def to(self, rep: str):
        if rep == self.rep:
            return self
        data = self.coefficients() if rep == FREQUENCY else self.physical()
        return replace(self, values=data, rep=rep)


@dataclass(frozen=True, eq=False)
class SpinorField(_GridField):
    """Four complex components per grid point, values shape (4, n, n, n)."""

    grid: Grid3
    values: np.ndarray
    rep: str = PHYSICAL

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 4 or values.shape[0] != 4:
            raise UsageError(f"spinor values must have shape (4, n, n, n), got {values.shape}")
        object.__setattr__(self, "values", values)
        self._check()
        _zero_nyquist(self)

    @classmethod
    def zeros(cls, grid: Grid3) -> "SpinorField":
        return cls(grid, np.zeros((4,) + grid.shape, dtype=complex))

    @classmethod
    def from_coefficients(cls, grid: Grid3, coeffs) -> "SpinorField":
        return cls(grid, coeffs, FREQUENCY)

    @classmethod
    def plane_wave(cls, grid: Grid3, k, spinor) -> "SpinorField":
        """``spinor * exp(i xi.x)`` with integer wavenumber ``k``."""
        coeffs = np.zeros((4,) + grid.shape, dtype=complex)
        idx = tuple(int(kj) % grid.n for kj in k)
        coeffs[(slice(None),) + idx] = np.asarray(spinor, dtype=complex)
        return cls(grid, coeffs, FREQUENCY)


@dataclass(frozen=True, eq=False)
class ScalarField(_GridField):
    """Complex scalar field, values shape (n, n, n)."""

    grid: Grid3
    values: np.ndarray
    rep: str = PHYSICAL

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 3:
            raise UsageError(f"scalar values must have shape (n, n, n), got {values.shape}")
        object.__setattr__(self, "values", values)
        self._check()
        _zero_nyquist(self)

    @classmethod
    def plane_wave(cls, grid: Grid3, k, amplitude=1.0) -> "ScalarField":
        coeffs = np.zeros(grid.shape, dtype=complex)
        coeffs[tuple(int(kj) % grid.n for kj in k)] = amplitude
        return cls(grid, coeffs, FREQUENCY)


def _zero_nyquist(f):
    mask = f.grid.nyquist_mask
    if f.rep == FREQUENCY:
        if np.any(f.values[..., ~mask] != 0):
            object.__setattr__(f, "values", f.values * mask)
        return
    c = _fftn(f.values)
    # round-off residue on the Nyquist row is tolerated so physical data stays bitwise intact
    if np.max(np.abs(c[..., ~mask]), initial=0.0) > _NYQUIST_TOL * max(np.max(np.abs(c)), 1e-300):
        object.__setattr__(f, "values", _ifftn(c * mask))


_NYQUIST_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class ScalarState:
    """Real scalar field and its time derivative, both stored in physical space."""

    grid: Grid3
    phi: np.ndarray
    phi_t: np.ndarray

    def __post_init__(self):
        mask = self.grid.nyquist_mask
        for name in ("phi", "phi_t"):
            a = np.asarray(getattr(self, name))
            if a.shape != self.grid.shape:
                raise UsageError(f"{name} shape {a.shape} does not match grid {self.grid.shape}")
            if np.iscomplexobj(a):
                scale = max(float(np.max(np.abs(a))), 1e-300)
                if np.max(np.abs(a.imag)) > 1e-12 * scale:
                    raise UsageError(f"{name} must be real")
                a = a.real
            a = np.asarray(a, dtype=float)
            c = _fftn(a)
            if np.max(np.abs(c[~mask]), initial=0.0) > _NYQUIST_TOL * max(np.max(np.abs(c)), 1e-300):
                a = _ifftn(c * mask).real
            object.__setattr__(self, name, a)

    @classmethod
    def zeros(cls, grid: Grid3) -> "ScalarState":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    @classmethod
    def from_coefficients(cls, grid: Grid3, phi_hat, phi_t_hat) -> "ScalarState":
        return cls(grid, _ifftn(phi_hat).real, _ifftn(phi_t_hat).real)

    def coefficients(self):
        return _fftn(self.phi), _fftn(self.phi_t)

    @property
    def phi_field(self) -> ScalarField:
        return ScalarField(self.grid, self.phi)

    @property
    def phi_t_field(self) -> ScalarField:
        return ScalarField(self.grid, self.phi_t)


def transform(f, direction: str):
    """Switch representation; ``direction`` is ``'forward'`` or ``'inverse'``."""
    if direction == "forward":
        if f.rep != PHYSICAL:
            raise UsageError("forward transform needs a field in physical representation")
        return f.to(FREQUENCY)
    if direction == "inverse":
        if f.rep != FREQUENCY:
            raise UsageError("inverse transform needs a field in frequency representation")
        return f.to(PHYSICAL)
    raise UsageError(f"unknown direction {direction!r}")


Symbol = Callable[[np.ndarray], np.ndarray]


def evaluate_symbol(symbol: Symbol, grid: Grid3) -> np.ndarray:
    """Evaluate a vectorized symbol on the grid frequencies.

    ``symbol`` receives ``xi`` of shape (3, n, n, n) and returns either a
    scalar array broadcastable to (n, n, n) or a matrix array (n, n, n, 4, 4).
    Nyquist modes are excluded from the finiteness check since fields never
    carry them.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = np.asarray(symbol(grid.xi))
    if values.ndim <= 3:
        values = np.broadcast_to(values, grid.shape)
        bad = ~np.isfinite(values) & grid.nyquist_mask
    else:
        if values.shape != grid.shape + (4, 4):
            raise UsageError(f"matrix symbol must have shape {grid.shape + (4, 4)}, got {values.shape}")
        bad = ~np.all(np.isfinite(values), axis=(-2, -1)) & grid.nyquist_mask
    if np.any(bad):
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        k = tuple(int(grid.k[j][idx]) for j in range(3))
        raise DomainError(f"symbol is not finite at frequency k={k}")
    if values.ndim <= 3:
        return np.where(grid.nyquist_mask, values, 0)
    return np.where(grid.nyquist_mask[..., None, None], values, 0)


def apply_multiplier(f, symbol: Symbol):
    """Multiply each Fourier mode by ``symbol(xi)``; matrix symbols act on spinor components."""
    s = evaluate_symbol(symbol, f.grid)
    c = f.coefficients()
    if s.ndim == 3:
        out = s * c
    else:
        if not isinstance(f, SpinorField):
            raise UsageError("matrix-valued symbols need a spinor field")
        out = np.einsum("...ab,b...->a...", s, c)
    return replace(f, values=out, rep=FREQUENCY).to(f.rep)


def abs_d(xi):
    return np.sqrt(np.sum(xi**2, axis=0))


def japanese(s: float) -> Symbol:
    """Symbol ``<xi>^s = (1 + |xi|)^s``."""
    return lambda xi: (1.0 + abs_d(xi)) ** s


def projection_symbol(sign) -> Symbol:
    from .algebra import projection

    return lambda xi: projection(sign, np.moveaxis(xi, 0, -1))


def dirac_symbol(xi):
    """Symbol of ``-i alpha . grad``, i.e. ``alpha . xi``."""
    return alpha_dot(np.moveaxis(xi, 0, -1))


def project_coefficients(c: np.ndarray, grid: Grid3, sign) -> np.ndarray:
    """Apply ``Pi_sign(D)`` to spinor coefficients of shape (..., 4, n, n, n).

    Uses the block structure of alpha rather than 4x4 matrices per mode.
    The zero mode gets ``I/2``.
    """
    s = int(Sign.parse(sign))
    absx = grid.abs_xi
    inv = np.divide(1.0, absx, out=np.zeros_like(absx), where=absx > 0)
    n1, n2, n3 = (grid.xi[j] * inv for j in range(3))
    return 0.5 * (c + s * _sigma_dot_swap(c, n1, n2, n3))


def _sigma_dot_swap(c, n1, n2, n3):
    """``(alpha . n) c`` using alpha = [[0, sigma], [sigma, 0]]."""
    u0, u1, l0, l1 = c[..., 0, :, :, :], c[..., 1, :, :, :], c[..., 2, :, :, :], c[..., 3, :, :, :]
    minus = n1 - 1j * n2
    plus = n1 + 1j * n2
    return np.stack(
        [n3 * l0 + minus * l1, plus * l0 - n3 * l1, n3 * u0 + minus * u1, plus * u0 - n3 * u1],
        axis=-4,
    )


def project_field(psi: SpinorField, sign) -> SpinorField:
    """``Pi_sign(D) psi``."""
    c = project_coefficients(psi.coefficients(), psi.grid, sign)
    return SpinorField(psi.grid, c, FREQUENCY).to(psi.rep)


def half_wave_phase(grid: Grid3, sign, t: float) -> np.ndarray:
    """Per-mode factor of ``U_sign(t) = exp(-sign i t |D|)``."""
    s = int(Sign.parse(sign))
    return np.exp(-1j * s * t * grid.abs_xi)


def half_wave_propagate(psi, sign, t: float):
    """Free flow of ``(-i d/dt + sign |D|) u = 0``: multiply by ``exp(-sign i t |D|)``."""
    c = psi.coefficients() * half_wave_phase(psi.grid, sign, t)
    return replace(psi, values=c, rep=FREQUENCY).to(psi.rep)


def kg_rotation(omega: np.ndarray, t: float):
    """Coefficients of the exact Klein-Gordon flow for frequencies ``omega``.

    Returns ``(cos, sin/omega, -omega sin)`` with ``sin/omega -> t`` at zero.
    """
    wt = omega * t
    cos = np.cos(wt)
    sinc = t * np.sinc(wt / np.pi)
    return cos, sinc, -omega * np.sin(wt)


def kg_propagate(state: ScalarState, t: float, m: float) -> ScalarState:
    """Exact flow of ``phi_tt = Laplacian(phi) - m^2 phi`` over time ``t``."""
    if m < 0:
        raise DomainError(f"mass must be non-negative, got {m}")
    grid = state.grid
    omega = np.sqrt(grid.abs_xi**2 + m * m)
    p, q = state.coefficients()
    cos, sinc, msin = kg_rotation(omega, t)
    return ScalarState.from_coefficients(grid, cos * p + sinc * q, msin * p + cos * q)


def kg_energy(state: ScalarState, m: float) -> float:
    """Discrete ``int (phi_t^2 + |grad phi|^2 + m^2 phi^2) dx`` via Parseval."""
    p, q = state.coefficients()
    grid = state.grid
    w = grid.abs_xi**2 + m * m
    return float(grid.volume * np.sum(np.abs(q) ** 2 + w * np.abs(p) ** 2))


def sobolev_norm(f, s: float, homogeneous: bool = False) -> float:
    """``H^s`` (or homogeneous ``H^s`` without the zero mode) norm.

    ``sqrt(L^3 sum_k w(xi)^2 |c_k|^2)`` with ``w = (1+|xi|)^s`` or ``|xi|^s``,
    summed over components for spinors. Accepts a raw real array on a grid
    via :class:`ScalarField`.
    """
    grid = f.grid
    c = f.coefficients()
    absx = grid.abs_xi
    if homogeneous:
        w2 = np.zeros_like(absx)
        np.power(absx, 2 * s, out=w2, where=absx > 0)
    else:
        w2 = (1.0 + absx) ** (2 * s)
    mass = np.abs(c) ** 2
    if mass.ndim == 4:
        mass = mass.sum(axis=0)
    return float(np.sqrt(grid.volume * np.sum(w2 * mass)))


def l2_norm(f) -> float:
    """Physical-space quadrature norm ``sqrt((L/n)^3 sum |u|^2)``."""
    u = f.physical()
    return float(np.sqrt(f.grid.cell_volume * np.sum(np.abs(u) ** 2)))


def charge(psi: SpinorField) -> float:
    """Discrete ``int |psi|^2 dx``."""
    return l2_norm(psi) ** 2


def random_spinor(grid: Grid3, rng: np.random.Generator, decay: float = 2.0,
                  kmax: float | None = None, zero_mean: bool = False) -> SpinorField:
    """Random smooth spinor: Gaussian coefficients with envelope ``(1+|k|)^-decay``."""
    kabs = np.sqrt(np.sum(grid.k.astype(float) ** 2, axis=0))
    env = (1.0 + kabs) ** (-decay)
    if kmax is not None:
        env = env * (kabs <= kmax)
    c = (rng.standard_normal((4,) + grid.shape) + 1j * rng.standard_normal((4,) + grid.shape)) * env
    if zero_mean:
        c[:, 0, 0, 0] = 0
    return SpinorField(grid, c, FREQUENCY)


def random_scalar_state(grid: Grid3, rng: np.random.Generator, decay: float = 2.5,
                        kmax: float | None = None) -> ScalarState:
    """Random smooth real pair ``(phi, phi_t)``."""
    kabs = np.sqrt(np.sum(grid.k.astype(float) ** 2, axis=0))
    env = (1.0 + kabs) ** (-decay)
    if kmax is not None:
        env = env * (kabs <= kmax)
    out = []
    for _ in range(2):
        c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * env
        out.append(_ifftn(c).real)
    return ScalarState(grid, out[0], out[1])


__all__ = [
    "ALPHA", "Grid3", "SpinorField", "ScalarField", "ScalarState", "UsageError",
    "transform", "apply_multiplier", "evaluate_symbol", "abs_d", "japanese",
    "projection_symbol", "dirac_symbol", "project_coefficients", "project_field",
    "half_wave_phase", "half_wave_propagate", "kg_rotation", "kg_propagate", "kg_energy",
    "sobolev_norm", "l2_norm", "charge", "random_spinor", "random_scalar_state",
]
