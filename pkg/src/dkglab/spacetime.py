"""Space-time Fourier analysis on [0, T_win) x box.

Coefficients of a sampled field ``u(t_j, x)`` with ``t_j = j T_win / n_t`` are

    u~(tau, k) = (n_t n^3)^-1 sum_{j, x} w(t_j) u(t_j, x) exp(-i (tau t_j + xi . x))

with ``tau = (2 pi / T_win) * integer``, so a factor ``exp(i w t)`` sits at
``tau = w``. Under this convention the plus half-wave ``exp(-i t |D|)`` lives
on ``tau = -|xi|`` and the weight ``<tau + |xi|>`` vanishes on it. Norms are
``sqrt(T_win L^3 sum weight |u~|^2)`` divided by the root mean square of
the time window, so a tapered free wave keeps its unwindowed mass.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .algebra import BETA, Sign
from .fields import FREQUENCY, Grid3, ScalarField, SpinorField, UsageError, project_coefficients

WINDOWS = ("rect", "bump")
DEFAULT_WINDOW = "bump"
MIN_TIME_SAMPLES = 8


class ResolutionError(ValueError):
    pass


def window_values(name: str, n_t: int) -> np.ndarray:
    """Taper sampled at ``t_j / T_win = j / n_t``.

    ``bump`` is ``exp(1 - 1/(1 - x^2))`` with ``x = 2 t / T_win - 1``, zero
    at the window edges and equal to 1 at its centre.
    """
    if name == "rect":
        return np.ones(n_t)
    if name == "bump":
        x = 2 * np.arange(n_t) / n_t - 1
        w = np.zeros(n_t)
        inside = np.abs(x) < 1
        w[inside] = np.exp(1 - 1 / (1 - x[inside] ** 2))
        return w
    raise UsageError(f"unknown window {name!r}; expected one of {WINDOWS}")


def window_energy(name: str, n_t: int) -> float:
    """Mean of the squared taper (1 for the rectangular window)."""
    return float(np.mean(window_values(name, n_t) ** 2))


@dataclass(frozen=True, eq=False)
class SpacetimeField:
    """Samples on the space-time grid; ``values`` has shape (n_t, [4,] n, n, n)."""

    grid: Grid3
    T_win: float
    values: np.ndarray
    window: str = "rect"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape[-3:] != self.grid.shape or v.ndim not in (4, 5):
            raise UsageError(f"space-time values of shape {v.shape} do not fit grid {self.grid.shape}")
        if v.ndim == 5 and v.shape[1] != 4:
            raise UsageError("spinor space-time values need 4 components on axis 1")
        if v.shape[0] < MIN_TIME_SAMPLES:
            raise ResolutionError(f"need at least {MIN_TIME_SAMPLES} time samples, got {v.shape[0]}")
        if not self.T_win > 0:
            raise UsageError("window length must be positive")
        window_values(self.window, 1)
        object.__setattr__(self, "values", v)

    @property
    def n_t(self) -> int:
        return self.values.shape[0]

    @property
    def is_spinor(self) -> bool:
        return self.values.ndim == 5

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t) * (self.T_win / self.n_t)

    @property
    def tau(self) -> np.ndarray:
        return (2 * np.pi / self.T_win) * np.fft.fftfreq(self.n_t, 1.0 / self.n_t)

    @property
    def window_energy(self) -> float:
        return window_energy(self.window, self.n_t)

    def coefficients(self) -> np.ndarray:
        w = window_values(self.window, self.n_t)
        shape = (self.n_t,) + (1,) * (self.values.ndim - 1)
        axes = (0,) + tuple(range(self.values.ndim - 3, self.values.ndim))
        return sfft.fftn(self.values * w.reshape(shape), axes=axes, norm="forward")

    @classmethod
    def from_coefficients(cls, grid: Grid3, T_win: float, coeffs: np.ndarray) -> "SpacetimeField":
        axes = (0,) + tuple(range(coeffs.ndim - 3, coeffs.ndim))
        return cls(grid, T_win, sfft.ifftn(coeffs, axes=axes, norm="forward"), "rect")

    def l2_norm(self) -> float:
        """Quadrature norm of the windowed samples, compensated by the window energy."""
        w = window_values(self.window, self.n_t)
        shape = (self.n_t,) + (1,) * (self.values.ndim - 1)
        mass = np.sum(np.abs(self.values * w.reshape(shape)) ** 2)
        cell = (self.T_win / self.n_t) * self.grid.cell_volume
        return float(np.sqrt(cell * mass / self.window_energy))


@dataclass(frozen=True)
class NormSpec:
    s: float
    b: float
    sign: int | None = None
    variant: str = "X_pm"

    def __post_init__(self):
        if self.variant not in ("X_pm", "H_sb", "H_script"):
            raise UsageError(f"unknown norm variant {self.variant!r}")
        if self.variant == "X_pm":
            if self.sign is None:
                raise UsageError("X_pm norms need a sign")
            object.__setattr__(self, "sign", int(Sign.parse(self.sign)))

    def label(self) -> str:
        if self.variant == "X_pm":
            name = "X+" if self.sign > 0 else "X-"
        else:
            name = "H" if self.variant == "H_sb" else "Hs"
        return f"{name}^({self.s:g},{self.b:g})"


def _weights(spec: NormSpec, tau: np.ndarray, grid: Grid3, s: float | None = None) -> np.ndarray:
    s = spec.s if s is None else s
    absx = grid.abs_xi
    spatial = (1.0 + absx) ** (2 * s)
    t = tau[:, None, None, None]
    if spec.variant == "X_pm":
        mod = np.abs(t + spec.sign * absx)
    else:
        mod = np.abs(np.abs(t) - absx)
    return spatial[None] * (1.0 + mod) ** (2 * spec.b)


def coefficient_norm(coeffs: np.ndarray, tau: np.ndarray, grid: Grid3, T_win: float,
                     spec: NormSpec, energy: float = 1.0) -> float:
    """Weighted norm of space-time coefficients (scalar or spinor layout)."""
    mass = np.abs(coeffs) ** 2
    if mass.ndim == 5:
        mass = mass.sum(axis=1)
    total = np.sum(_weights(spec, tau, grid) * mass)
    if spec.variant == "H_script":
        total_dt = np.sum(_weights(spec, tau, grid, spec.s - 1) * (tau**2)[:, None, None, None] * mass)
        return float(np.sqrt(T_win * grid.volume / energy) * (np.sqrt(total) + np.sqrt(total_dt)))
    return float(np.sqrt(T_win * grid.volume * total / energy))


def st_norm(u: SpacetimeField, spec: NormSpec) -> float:
    """``X^{s,b}`` (signed), ``H^{s,b}`` or ``H^{s,b}`` plus time-derivative norm."""
    return coefficient_norm(u.coefficients(), u.tau, u.grid, u.T_win, spec, u.window_energy)


def sign_split(u: SpacetimeField) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients restricted to ``tau <= 0`` (plus part) and ``tau > 0`` (minus part)."""
    c = u.coefficients()
    neg = (u.tau <= 0).reshape((-1,) + (1,) * (c.ndim - 1))
    return c * neg, c * ~neg


def spacetime_transform(samples, window: str = DEFAULT_WINDOW, component: str = "psi") -> SpacetimeField:
    """Build a :class:`SpacetimeField` from uniformly spaced samples.

    ``samples`` is a sequence of solver states (``component`` picks
    ``psi``, ``psi_plus``, ``psi_minus``, ``phi`` or ``phi_t``) or of
    ``(t, field)`` pairs.
    """
    samples = list(samples)
    if len(samples) < MIN_TIME_SAMPLES:
        raise ResolutionError(f"need at least {MIN_TIME_SAMPLES} time samples, got {len(samples)}")
    times, arrays, grid = [], [], None
    for item in samples:
        if isinstance(item, tuple):
            t, f = item
            arr = f.physical()
            g = f.grid
        else:
            t, g = item.t, item.grid
            if component in ("phi", "phi_t"):
                arr = getattr(item.scalar, component).astype(complex)
            else:
                arr = getattr(item, component).physical()
        times.append(float(t))
        arrays.append(arr)
        grid = g
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise ResolutionError("time samples are not uniformly spaced")
    T_win = float(dts[0] * len(times))
    return SpacetimeField(grid, T_win, np.stack(arrays), window)


def free_wave(f, sign, T_win: float, n_t: int, window: str = DEFAULT_WINDOW) -> SpacetimeField:
    """Samples of ``exp(-sign i t |D|) f`` at ``n_t`` points of ``[0, T_win)``."""
    s = int(Sign.parse(sign))
    c = f.coefficients()
    t = np.arange(n_t) * (T_win / n_t)
    phase = np.exp(-1j * s * t[:, None, None, None] * f.grid.abs_xi[None])
    if c.ndim == 4:
        phase = phase[:, None]
    vals = sfft.ifftn(phase * c[None], axes=(-3, -2, -1), norm="forward")
    return SpacetimeField(f.grid, T_win, vals, window)


def cone_leakage(u: SpacetimeField, sign, band: float) -> float:
    """Fraction of coefficient mass with ``|tau + sign |xi|| > band``."""
    s = int(Sign.parse(sign))
    c = u.coefficients()
    mass = np.abs(c) ** 2
    if mass.ndim == 5:
        mass = mass.sum(axis=1)
    off = np.abs(u.tau[:, None, None, None] + s * u.grid.abs_xi[None]) > band
    total = mass.sum()
    return float(mass[off].sum() / total) if total > 0 else 0.0


# ---------------------------------------------------------------------------
# bilinear null form


def project_spacetime(u: SpacetimeField, sign) -> np.ndarray:
    """Samples of ``Pi_sign(D) u`` (spatial projection at each time)."""
    if not u.is_spinor:
        raise UsageError("projections act on spinor fields")
    c = sfft.fftn(u.values, axes=(-3, -2, -1), norm="forward")
    c = project_coefficients(c, u.grid, sign)
    return sfft.ifftn(c, axes=(-3, -2, -1), norm="forward")


def bilinear_form(psi: SpacetimeField, psi_prime: SpacetimeField, signs) -> SpacetimeField:
    """Pointwise ``<beta Pi_s1(D) psi, Pi_s2(D) psi'>`` with ``<a, b> = sum a_i conj(b_i)``."""
    if psi.grid != psi_prime.grid or psi.n_t != psi_prime.n_t or psi.T_win != psi_prime.T_win:
        raise UsageError("space-time fields live on different grids")
    s1, s2 = (Sign.parse(s) for s in signs)
    a = project_spacetime(psi, s1)
    b = project_spacetime(psi_prime, s2)
    beta = np.diag(BETA).real.reshape(1, 4, 1, 1, 1)
    vals = np.sum(beta * a * np.conj(b), axis=1)
    return SpacetimeField(psi.grid, psi.T_win, vals, psi.window)


# ---------------------------------------------------------------------------
# random test data with prescribed space-time frequency support


_MASTER_K = 15  # draws live on |k_j| <= 15 so low modes agree across resolutions


@dataclass(frozen=True)
class SampleProfile:
    """Shape of a random superposition.

    ``kind`` is ``decay`` (amplitude ``<k>^-power`` on every allowed mode),
    ``shell`` (modes with ``|k|`` in the outer half of the allowed range) or
    ``sparse`` (a handful of random modes).
    """

    kind: str = "decay"
    power: float = 2.0
    layers: int = 2
    lam_scale: float = 1.0
    lam_max: float = 2.0


def allowed_kmax(n: int) -> int:
    """Largest per-axis wavenumber of synthesized inputs (products then fit without wrap-around)."""
    return n // 4 - 1


def _master_draws(rng: np.random.Generator, layers: int, spinor: bool):
    side = 2 * _MASTER_K + 1
    comps = (4,) if spinor else ()
    shape = (layers,) + comps + (side,) * 3
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    lam = rng.standard_normal((layers,) + (side,) * 3)
    pick = rng.random((side,) * 3)
    return coeffs, lam, pick


def _embed(master: np.ndarray, n: int, kmax: int) -> np.ndarray:
    """Copy the block ``|k_j| <= kmax`` of a master cube into FFT ordering on an n-grid."""
    lead = master.shape[:-3]
    out = np.zeros(lead + (n,) * 3, dtype=master.dtype)
    ks = np.arange(-kmax, kmax + 1)
    src = ks + _MASTER_K
    dst = ks % n
    out[np.ix_(*([np.arange(s) for s in lead] + [dst, dst, dst]))] = master[
        np.ix_(*([np.arange(s) for s in lead] + [src, src, src]))]
    return out


def _profile_envelope(profile: SampleProfile, grid: Grid3, kmax: int, pick: np.ndarray) -> np.ndarray:
    kabs = np.sqrt(np.sum(grid.k.astype(float) ** 2, axis=0))
    inside = np.all(np.abs(grid.k) <= kmax, axis=0)
    if profile.kind == "decay":
        env = (1.0 + kabs) ** (-profile.power)
    elif profile.kind == "shell":
        env = ((kabs >= kmax / 2) & (kabs <= kmax)).astype(float)
    elif profile.kind == "sparse":
        env = (_embed(pick, grid.n, kmax) > 0.97).astype(float) * (1.0 + kabs) ** (-profile.power / 2)
    else:
        raise UsageError(f"unknown sample profile {profile.kind!r}")
    return env * inside


def synthesize(grid: Grid3, T_win: float, n_t: int, sign, rng: np.random.Generator,
               profile: SampleProfile = SampleProfile(), spinor: bool = False):
    """Random superposition of modulated free waves on the discrete foliation.

    Each spatial mode carries ``profile.layers`` modulations; a layer with
    nominal modulation ``lam`` is placed at the time-frequency bin nearest to
    ``lam - sign |xi|``, and its actual modulation is that bin plus
    ``sign |xi|``. ``sign`` may be ``0`` for a random per-mode sign.
    Returns ``(field, modulation)``: the coefficient array in space-time
    layout and the per-coefficient actual modulation (for the plus/minus
    weight of the chosen sign).
    """
    kmax = allowed_kmax(grid.n)
    coeffs, lam, pick = _master_draws(rng, profile.layers, spinor)
    env = _profile_envelope(profile, grid, kmax, pick)
    c_layers = _embed(coeffs, grid.n, kmax) * (env if not spinor else env[None])
    lam_layers = np.clip(profile.lam_scale * _embed(lam, grid.n, kmax), -profile.lam_max, profile.lam_max)
    if sign == 0:
        signs = np.where(_embed(pick, grid.n, kmax) < 0.5, 1, -1)
    else:
        signs = np.full(grid.shape, int(Sign.parse(sign)))
    dtau = 2 * np.pi / T_win
    tau_limit = n_t / 4
    absx = grid.abs_xi
    out_shape = (n_t,) + ((4,) if spinor else ()) + grid.shape
    out = np.zeros(out_shape, dtype=complex)
    for layer in range(profile.layers):
        target = lam_layers[layer] - signs * absx
        j = np.rint(target / dtau).astype(int)
        ok = (np.abs(j) < tau_limit) & (env > 0)
        idx = np.nonzero(ok)
        jt = j[idx] % n_t
        if spinor:
            for comp in range(4):
                np.add.at(out[:, comp], (jt,) + idx, c_layers[layer][comp][idx])
        else:
            np.add.at(out, (jt,) + idx, c_layers[layer][idx])
    return out


def random_xsb(spec: NormSpec, seed, grid: Grid3, T_win: float = 2 * np.pi, n_t: int | None = None,
               profile: SampleProfile = SampleProfile(), spinor: bool = False,
               mixed_sign: bool = False) -> SpacetimeField:
    """Random superposition with ``st_norm(result, spec) = 1``.

    The target norm is the discrete foliation sum over the actual per-mode
    modulations, which coincides with ``st_norm`` for the rectangular window.
    ``mixed_sign`` draws a random half-wave sign per mode (useful for
    ``H^{s,b}`` inputs); otherwise ``spec`` must carry a sign.
    """
    if spec.variant != "X_pm" and not mixed_sign:
        raise UsageError("random_xsb synthesizes X_pm samples unless mixed_sign is set")
    n_t = n_t or 2 * grid.n
    rng = np.random.default_rng(seed)
    coeffs = synthesize(grid, T_win, n_t, 0 if mixed_sign else spec.sign, rng, profile, spinor)
    tau = (2 * np.pi / T_win) * np.fft.fftfreq(n_t, 1.0 / n_t)
    norm = coefficient_norm(coeffs, tau, grid, T_win, spec)
    if norm == 0:
        raise UsageError("sample profile produced an empty field")
    return SpacetimeField.from_coefficients(grid, T_win, coeffs / norm)


def foliation_norm(coeffs: np.ndarray, grid: Grid3, T_win: float, sign, s: float, b: float) -> float:
    """``sqrt(sum_lambda ||f(lambda)||_{H^s}^2 <lambda>^{2b})`` with ``lambda = tau + sign |xi|``.

    Independent re-evaluation of the signed norm from the superposition
    viewpoint, used as a cross-check of :func:`st_norm`.
    """
    sg = int(Sign.parse(sign))
    n_t = coeffs.shape[0]
    tau = (2 * np.pi / T_win) * np.fft.fftfreq(n_t, 1.0 / n_t)
    total = 0.0
    hs = (1.0 + grid.abs_xi) ** (2 * s)
    for j in range(n_t):
        c = coeffs[j]
        mass = np.abs(c) ** 2
        if mass.ndim == 4:
            mass = mass.sum(axis=0)
        lam = tau[j] + sg * grid.abs_xi
        total += float(np.sum(hs * (1 + np.abs(lam)) ** (2 * b) * mass))
    return float(np.sqrt(T_win * grid.volume * total))


def time_derivative(u: SpacetimeField) -> SpacetimeField:
    """Spectral time derivative (exact for the rectangular window on periodic samples)."""
    c = u.coefficients()
    shape = (-1,) + (1,) * (c.ndim - 1)
    return SpacetimeField.from_coefficients(u.grid, u.T_win, 1j * u.tau.reshape(shape) * c)


def product(u: SpacetimeField, v: SpacetimeField) -> SpacetimeField:
    """Pointwise product of two scalar space-time fields."""
    if u.grid != v.grid or u.n_t != v.n_t or u.T_win != v.T_win:
        raise UsageError("space-time fields live on different grids")
    if u.is_spinor or v.is_spinor:
        raise UsageError("products are defined for scalar fields")
    return SpacetimeField(u.grid, u.T_win, u.values * v.values, u.window)
