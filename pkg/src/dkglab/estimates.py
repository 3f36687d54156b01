"""Frequency-weight checks and empirical ratio tests for bilinear estimates.

Ratio probes can only falsify an inequality: they report the largest
observed ratio over seeded samples and how it moves under grid refinement.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .algebra import DomainError, Sign
from .fields import FREQUENCY, Grid3, ScalarField, SpinorField, UsageError, project_coefficients, sobolev_norm
from .spacetime import (
    DEFAULT_WINDOW, NormSpec, SampleProfile, SpacetimeField, _embed, _master_draws, _profile_envelope,
    allowed_kmax, coefficient_norm, synthesize,
)

# ---------------------------------------------------------------------------
# frequency weights

COMPARABILITY_BOUNDS = (1.0, math.pi**2 / 2)


@dataclass
class WeightReport:
    tuples: int = 0
    degenerate: int = 0
    max_rel_error_a: float = 0.0
    max_rel_error_b: float = 0.0
    violations: dict = field(default_factory=lambda: {
        "identity_a": 0, "identity_b": 0, "comparability": 0, "modulation_bound": 0, "triangle": 0})
    comparability_range: list = field(default_factory=lambda: [math.inf, -math.inf])

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    def merge(self, other: "WeightReport") -> "WeightReport":
        out = WeightReport(self.tuples + other.tuples, self.degenerate + other.degenerate,
                           max(self.max_rel_error_a, other.max_rel_error_a),
                           max(self.max_rel_error_b, other.max_rel_error_b))
        out.violations = {k: self.violations[k] + other.violations[k] for k in self.violations}
        out.comparability_range = [min(self.comparability_range[0], other.comparability_range[0]),
                                   max(self.comparability_range[1], other.comparability_range[1])]
        return out

    def as_dict(self) -> dict:
        lo, hi = self.comparability_range
        return {
            "tuples": self.tuples,
            "degenerate_skipped": self.degenerate,
            "max_rel_error_a": self.max_rel_error_a,
            "max_rel_error_b": self.max_rel_error_b,
            "comparability_bounds": list(COMPARABILITY_BOUNDS),
            "comparability_observed": [lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None],
            "violations": dict(self.violations),
            "total_violations": self.total_violations,
        }


def random_tuples(count: int, rng: np.random.Generator):
    """Random ``(tau, lam, xi, eta)`` with log-uniform magnitudes.

    A quarter of the tuples put ``eta`` nearly parallel or antiparallel to
    ``xi`` and a quarter put ``tau``/``lam`` on the cones, the regimes where
    the inequalities are tight.
    """
    def vecs(k):
        v = rng.standard_normal((k, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * np.exp(rng.uniform(-4, 4, (k, 1)))

    xi, eta = vecs(count), vecs(count)
    q = count // 4
    scale = np.exp(rng.uniform(-4, 4, (q, 1)))
    sign = rng.choice([-1.0, 1.0], (q, 1))
    eta[:q] = sign * scale * (xi[:q] / np.linalg.norm(xi[:q], axis=1, keepdims=True)) + 1e-6 * rng.standard_normal((q, 3))
    tau = rng.standard_normal(count) * np.exp(rng.uniform(-3, 3, count))
    lam = rng.standard_normal(count) * np.exp(rng.uniform(-3, 3, count))
    zeta_n = np.linalg.norm(eta - xi, axis=1)
    sel = slice(q, 2 * q)
    tau[sel] = rng.choice([-1.0, 1.0], q) * np.linalg.norm(xi[sel], axis=1)
    lam[sel] = -np.linalg.norm(eta[sel], axis=1)
    return tau, lam, xi, eta


def _angle(a, b):
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))


def weight_checks(tau, lam, xi, eta, tol: float = 1e-9) -> WeightReport:
    """Check the angle/modulation laws on arrays of frequency tuples.

    With ``theta_pm`` the angle between ``eta`` and ``pm(eta - xi)``,
    ``r_plus = |xi| - ||eta| - |eta - xi||`` and
    ``r_minus = |eta| + |eta - xi| - |xi|``:

    a. ``2 (1 - cos theta_plus) |eta||eta - xi| = |xi|^2 - (|eta| - |eta - xi|)^2``
    b. ``2 (1 - cos theta_minus) |eta||eta - xi| = (|eta| + |eta - xi|)^2 - |xi|^2``
    c. ``lo <= theta_pm^2 / q_pm <= hi`` with ``q_plus = |xi| r_plus / (|eta||eta - xi|)``,
       ``q_minus = (|eta| + |eta - xi|) r_minus / (|eta||eta - xi|)`` and the bounds
       :data:`COMPARABILITY_BOUNDS`
    d. ``r_pm <= ||tau| - |xi|| + |lam + |eta|| + |lam - tau pm |eta - xi||``
    e. ``r_pm <= 2 min(|eta|, |eta - xi|)``

    Tuples with ``eta = 0`` or ``eta = xi`` are skipped and counted.
    """
    tau, lam = np.asarray(tau, float), np.asarray(lam, float)
    xi, eta = np.atleast_2d(np.asarray(xi, float)), np.atleast_2d(np.asarray(eta, float))
    d = eta - xi
    ne, nd, nx = (np.linalg.norm(v, axis=1) for v in (eta, d, xi))
    ok = (ne > 0) & (nd > 0)
    rep = WeightReport(tuples=int(ok.sum()), degenerate=int((~ok).sum()))
    tau, lam, xi, eta, d, ne, nd, nx = (a[ok] for a in (tau, lam, xi, eta, d, ne, nd, nx))
    if tau.size == 0:
        return rep
    th_p = _angle(eta, d)
    th_m = _angle(eta, -d)
    r_p = nx - np.abs(ne - nd)
    r_m = ne + nd - nx
    prod = ne * nd
    scale = ne**2 + nd**2
    err_a = np.abs(2 * (1 - np.cos(th_p)) * prod - (nx**2 - (ne - nd) ** 2)) / scale
    err_b = np.abs(2 * (1 - np.cos(th_m)) * prod - ((ne + nd) ** 2 - nx**2)) / scale
    rep.max_rel_error_a = float(err_a.max())
    rep.max_rel_error_b = float(err_b.max())
    rep.violations["identity_a"] = int(np.sum(err_a > tol))
    rep.violations["identity_b"] = int(np.sum(err_b > tol))

    lo, hi = COMPARABILITY_BOUNDS
    bad = 0
    observed = [math.inf, -math.inf]
    for theta, q in ((th_p, nx * r_p / prod), (th_m, (ne + nd) * r_m / prod)):
        t2 = theta**2
        # absolute slack absorbs round-off of r_pm near theta = 0
        slack = 64 * np.finfo(float).eps * (1 + (nx + ne + nd) ** 2 / prod)
        bad += int(np.sum(t2 < lo * q * (1 - tol) - slack) + np.sum(t2 > hi * q * (1 + tol) + slack))
        big = q > 1e-6
        if np.any(big):
            ratio = t2[big] / q[big]
            observed = [min(observed[0], float(ratio.min())), max(observed[1], float(ratio.max()))]
    rep.violations["comparability"] = bad
    rep.comparability_range = observed

    mod_slack = 1e-12 * (np.abs(tau) + np.abs(lam) + nx + ne + nd)
    rhs_p = np.abs(np.abs(tau) - nx) + np.abs(lam + ne) + np.abs(lam - tau + nd)
    rhs_m = np.abs(np.abs(tau) - nx) + np.abs(lam + ne) + np.abs(lam - tau - nd)
    rep.violations["modulation_bound"] = int(np.sum(r_p > rhs_p + mod_slack) + np.sum(r_m > rhs_m + mod_slack))
    tri_slack = 1e-12 * (nx + ne + nd)
    two_min = 2 * np.minimum(ne, nd)
    rep.violations["triangle"] = int(np.sum(r_p > two_min + tri_slack) + np.sum(r_m > two_min + tri_slack))
    return rep


def weight_sweep(samples: int, seed: int = 0, chunk: int = 200_000, tol: float = 1e-9) -> WeightReport:
    rng = np.random.default_rng(seed)
    rep = WeightReport()
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        rep = rep.merge(weight_checks(*random_tuples(k, rng), tol=tol))
        done += k
    return rep


# ---------------------------------------------------------------------------
# linear and bilinear free-wave ratios


def _free_samples(c: np.ndarray, grid: Grid3, sign: int, t: float) -> np.ndarray:
    return sfft.ifftn(c * np.exp(-1j * sign * t * grid.abs_xi), axes=(-3, -2, -1), norm="forward")


def strichartz_ratio(f, sign, T_win: float = 2 * np.pi, n_t: int | None = None) -> float:
    """``||exp(-sign i t |D|) f||_{L^4([0, T_win) x box)} / ||f||_{homogeneous H^(1/2)}``.

    The space-time integral is the rectangle rule on ``n_t`` time samples
    (default ``2 n``) and the spatial grid.
    """
    s = int(Sign.parse(sign))
    grid = f.grid
    c = f.coefficients()
    if np.max(np.abs(c)) == 0:
        raise DomainError("strichartz ratio is undefined for the zero field")
    zero = c[..., 0, 0, 0]
    if np.max(np.abs(zero)) > 1e-12 * np.max(np.abs(c)):
        raise DomainError("strichartz ratio needs a zero-mean field")
    n_t = n_t or 2 * grid.n
    acc = 0.0
    for t in np.arange(n_t) * (T_win / n_t):
        u = _free_samples(c, grid, s, t)
        dens = np.abs(u) ** 2
        if dens.ndim == 4:
            dens = dens.sum(axis=0)
        acc += float(np.sum(dens**2))
    l4 = ((T_win / n_t) * grid.cell_volume * acc) ** 0.25
    return l4 / sobolev_norm(f, 0.5, homogeneous=True)


def strichartz_single_mode(k, L: float, T_win: float) -> float:
    """Closed-form ratio for a unit-coefficient plane wave with wavenumber ``k``."""
    xi = 2 * np.pi / L * np.linalg.norm(np.asarray(k, float))
    return (T_win * L**3) ** 0.25 / (L**1.5 * math.sqrt(xi))


def default_floor(L: float) -> float:
    """One frequency-grid spacing squared, the default cap scale of the inverse wave weight."""
    return (2 * np.pi / L) ** 2


def key_bilinear_ratio(psi0: SpinorField, signs=("+", "+"), T_win: float = 2 * np.pi,
                       n_t: int | None = None, window: str = DEFAULT_WINDOW,
                       floor: float | None = None) -> float:
    """``|| |box|^(-1/2) <beta psi_s1, psi_s2> ||_{L^2} / ||psi0||_{L^2}^2``.

    ``psi_s = exp(-s i t |D|) Pi_s(D) psi0``. The inverse wave weight is
    ``min(|tau^2 - |xi|^2|^(-1/2), floor^(-1/2))`` with ``floor`` defaulting
    to :func:`default_floor`.
    """
    grid = psi0.grid
    s1, s2 = (int(Sign.parse(s)) for s in signs)
    c = psi0.coefficients()
    mass = float(grid.volume * np.sum(np.abs(c) ** 2))
    if mass == 0:
        raise DomainError("key bilinear ratio is undefined for zero data")
    floor = default_floor(grid.L) if floor is None else floor
    n_t = n_t or 2 * grid.n
    c1 = project_coefficients(c, grid, s1)
    c2 = project_coefficients(c, grid, s2)
    beta = np.array([1.0, 1.0, -1.0, -1.0]).reshape(4, 1, 1, 1)
    dens = np.empty((n_t,) + grid.shape, dtype=complex)
    for j, t in enumerate(np.arange(n_t) * (T_win / n_t)):
        a = _free_samples(c1, grid, s1, t)
        b = _free_samples(c2, grid, s2, t)
        dens[j] = np.sum(beta * a * np.conj(b), axis=0)
    field = SpacetimeField(grid, T_win, dens, window)
    coeffs = field.coefficients()
    tau = field.tau[:, None, None, None]
    symbol = np.abs(tau**2 - grid.abs_xi[None] ** 2)
    weight = 1.0 / np.maximum(symbol, floor)
    lhs = math.sqrt(T_win * grid.volume * float(np.sum(weight * np.abs(coeffs) ** 2)) / field.window_energy)
    return lhs / mass


def key_bilinear_single_mode(k, v, L: float, T_win: float) -> float:
    """Hand value of the rectangular-window ratio for data ``v exp(i k.x)`` and signs (+, -).

    The product is a single output mode at ``tau = -2|xi|``, ``xi = 0`` with
    amplitude ``v^dagger beta Pi_+(k) v``.
    """
    from .algebra import BETA, projection

    xi = 2 * np.pi / L * np.asarray(k, float)
    amp = np.vdot(v, BETA @ projection(+1, xi) @ v)
    absx = float(np.linalg.norm(xi))
    return math.sqrt(T_win * L**3) * abs(amp) / (2 * absx) / (L**3 * float(np.vdot(v, v).real))


# ---------------------------------------------------------------------------
# estimate registry

BASIS = ("1", "eps", "eps_prime", "delta", "N")


@dataclass(frozen=True)
class EstimateParams:
    eps: float = 0.1
    eps_prime: float = 0.01
    delta: float = 0.01
    N: float = 2.0

    def vector(self) -> np.ndarray:
        return np.array([1.0, self.eps, self.eps_prime, self.delta, self.N])


@dataclass(frozen=True)
class Space:
    """Space tag (``H``, ``X+``, ``X-``) with ``s`` and ``b`` as coefficient vectors over :data:`BASIS`."""

    tag: str
    s: tuple
    b: tuple

    def spec(self, params: EstimateParams) -> NormSpec:
        v = params.vector()
        s = float(np.dot(self.s, v))
        b = float(np.dot(self.b, v))
        if self.tag == "H":
            return NormSpec(s, b, None, "H_sb")
        return NormSpec(s, b, +1 if self.tag == "X+" else -1, "X_pm")


@dataclass(frozen=True)
class Estimate:
    """``||u v||_out <= C ||u||_first ||v||_second``."""

    id: str
    first: Space
    second: Space
    out: Space
    note: str = ""

    def describe(self, params: EstimateParams = EstimateParams()) -> str:
        return (f"{self.first.spec(params).label()} . {self.second.spec(params).label()}"
                f" -> {self.out.spec(params).label()}")


def _v(c1=0.0, eps=0.0, epsp=0.0, delta=0.0, N=0.0):
    return (c1, eps, epsp, delta, N)


B = _v(0.5, epsp=1)           # b = 1/2 + eps'
ZERO = _v()
HALF_MINUS_DELTA = _v(0.5, delta=-1)
HALF_MINUS_2EP = _v(0.5, epsp=-2)
NEG_HALF_PLUS_2EP = _v(-0.5, epsp=2)
NEG_B = _v(-0.5, epsp=-1)


def H(s, b):
    return Space("H", s, b)


def Xp(s, b):
    return Space("X+", s, b)


def Xm(s, b):
    return Space("X-", s, b)


class AdmissibilityError(ValueError):
    """A free-wave product descriptor outside the admissible exponent range."""

    def __init__(self, condition: str, exponents):
        super().__init__(f"KM{tuple(exponents)} rejected: violates {condition!r}")
        self.condition = condition


KM_CONDITIONS = ("s1+s2+s3 = 1", "s1, s2, s3 < 1", "s1+s2 > 1/2", "s1, s2, s3 >= 0")


def km_admissible(s1: float, s2: float, s3: float, tol: float = 1e-12) -> str | None:
    """Name of the first violated condition, or ``None``."""
    if abs(s1 + s2 + s3 - 1) > tol:
        return KM_CONDITIONS[0]
    if not (s1 < 1 and s2 < 1 and s3 < 1):
        return KM_CONDITIONS[1]
    if not s1 + s2 > 0.5:
        return KM_CONDITIONS[2]
    if not (s1 >= 0 and s2 >= 0 and s3 >= 0):
        return KM_CONDITIONS[3]
    return None


def km_estimate(s1: float, s2: float, s3: float) -> Estimate:
    """``H^{s1,b} . H^{s2,b} -> H^{-s3,0}``, gated by the admissibility conditions."""
    bad = km_admissible(s1, s2, s3)
    if bad is not None:
        raise AdmissibilityError(bad, (s1, s2, s3))
    return Estimate(f"KM({s1:g},{s2:g},{s3:g})", H(_v(s1), B), H(_v(s2), B), H(_v(-s3), ZERO),
                    "free-wave product bound transferred to H^{s,b}")


def _registry() -> dict:
    e = {}

    def add(est):
        e[est.id] = est

    add(km_estimate(0.5, 0.5, 0.0))
    add(km_estimate(0.25, 0.5, 0.25))
    add(Estimate("holder", H(ZERO, ZERO), H(ZERO, B), H(_v(N=-1), ZERO), "Hoelder plus Sobolev embedding"))
    add(Estimate("interp-1", H(ZERO, HALF_MINUS_DELTA), H(_v(0.5, 1), B), H(_v(-0.5), ZERO)))
    add(Estimate("interp-2", H(ZERO, HALF_MINUS_DELTA), H(_v(0.5), B), H(_v(-0.5, -1), ZERO)))
    add(Estimate("interp-3", H(_v(0.5, -1), HALF_MINUS_DELTA), H(_v(0.5, 1), B), H(_v(eps=-1), ZERO)))
    add(Estimate("interp-4", H(_v(0.5, -1), HALF_MINUS_DELTA), H(_v(eps=1), B), H(_v(-0.5, -1), ZERO)))
    add(Estimate("interp-5", H(_v(eps=-1), HALF_MINUS_DELTA), H(_v(0.5, 1), B), H(_v(-0.5, -1), ZERO)))
    # signed reductions, equal signs
    add(Estimate("null-pp-1", Xp(_v(0.5), B), Xp(_v(0.5, 1, -2), B), H(ZERO, ZERO)))
    add(Estimate("null-pp-2", Xp(_v(0.5), ZERO), Xp(_v(0.5, 1), B), H(ZERO, NEG_HALF_PLUS_2EP)))
    add(Estimate("null-pp-3", Xp(_v(0.5), B), Xp(_v(0.5, 1), ZERO), H(ZERO, NEG_HALF_PLUS_2EP)))
    # signed reductions, opposite signs
    add(Estimate("null-pm-1", Xp(_v(eps=1), B), Xm(_v(0.5, 1, -2), B), H(_v(-0.5, 1), ZERO)))
    add(Estimate("null-pm-2", Xp(_v(eps=1), ZERO), Xm(_v(0.5, 1), B), H(_v(-0.5, 1), NEG_HALF_PLUS_2EP)))
    add(Estimate("null-pm-3", Xp(_v(eps=1), B), Xm(_v(0.5, 1), ZERO), H(_v(-0.5, 1), NEG_HALF_PLUS_2EP)))
    # the same six with signs dropped and duality applied
    add(Estimate("reduced-pp-1", H(_v(0.5), B), H(_v(0.5, 1, -2), B), H(ZERO, ZERO)))
    add(Estimate("reduced-pp-2", H(ZERO, HALF_MINUS_2EP), H(_v(0.5, 1), B), H(_v(-0.5), ZERO)))
    add(Estimate("reduced-pp-3", H(_v(0.5), B), H(ZERO, HALF_MINUS_2EP), H(_v(-0.5, -1), ZERO)))
    add(Estimate("reduced-pm-1", H(_v(eps=1), B), H(_v(0.5, 1, -2), B), H(_v(-0.5, 1), ZERO)))
    add(Estimate("reduced-pm-2", H(_v(0.5, -1), HALF_MINUS_2EP), H(_v(0.5, 1), B), H(_v(eps=-1), ZERO)))
    add(Estimate("reduced-pm-3", H(_v(eps=1), B), H(_v(0.5, -1), HALF_MINUS_2EP), H(_v(-0.5, -1), ZERO)))
    # reductions of the dual estimate
    add(Estimate("dual-pp-1", H(_v(0.5, 1), B), H(_v(0.5, -1), _v(0.5, epsp=-1)), H(_v(eps=-1), ZERO)))
    add(Estimate("dual-pp-2", H(_v(0.5, 1), ZERO), H(_v(0.5, -1), _v(0.5, epsp=-1)), H(_v(eps=-1), NEG_B)))
    add(Estimate("dual-pp-3", H(_v(0.5, 1, -2), B), H(_v(0.5, -1, -2), ZERO), H(_v(eps=-1), NEG_B)))
    add(Estimate("dual-pm-1", H(_v(0.5, 1), B), H(_v(eps=-1), HALF_MINUS_2EP), H(_v(-0.5, -1), ZERO)))
    add(Estimate("dual-pm-2", H(_v(0.5, 1), ZERO), H(_v(eps=-1), HALF_MINUS_2EP), H(_v(-0.5, -1), NEG_B)))
    add(Estimate("dual-pm-3", H(_v(0.5, 1, -2), B), H(_v(eps=-1), ZERO), H(_v(-0.5, -1), NEG_B)))
    add(Estimate("dual-pm-4", H(_v(eps=1), B), H(_v(0.5, -1), HALF_MINUS_2EP), H(_v(-0.5, -1), ZERO)))
    add(Estimate("dual-pm-5", H(_v(eps=1), ZERO), H(_v(0.5, -1), HALF_MINUS_2EP), H(_v(-0.5, -1), NEG_B)))
    add(Estimate("dual-pm-6", H(_v(eps=1), B), H(_v(0.5, -1, -2), ZERO), H(_v(-0.5, -1), NEG_B)))
    return e


REGISTRY = _registry()
PROBE_ESTIMATES = ("KM(0.5,0.5,0)", "interp-1", "interp-2", "interp-3", "interp-4", "interp-5")

_KM_RE = re.compile(r"^\s*KM\s*\(([^,]+),([^,]+),([^,]+)\)\s*$")


def lookup_estimate(ident: str) -> Estimate:
    """Registry entry by id; ``KM(a,b,c)`` builds (and gates) a free-wave product descriptor."""
    m = _KM_RE.match(ident)
    if m:
        try:
            s = [float(x) for x in m.groups()]
        except ValueError as exc:
            raise UsageError(f"cannot parse exponents in {ident!r}") from exc
        return km_estimate(*s)
    if ident not in REGISTRY:
        raise UsageError(f"unknown estimate {ident!r}")
    return REGISTRY[ident]


# ---------------------------------------------------------------------------
# product ratios


@lru_cache(maxsize=48)
def _weight_array(spec: NormSpec, n: int, L: float, n_t: int, T_win: float):
    from .spacetime import _weights

    grid = Grid3(n, L)
    tau = (2 * np.pi / T_win) * np.fft.fftfreq(n_t, 1.0 / n_t)
    w = _weights(spec, tau, grid)
    w.setflags(write=False)
    return w


def _norm(coeffs_mass: np.ndarray, spec: NormSpec, u: SpacetimeField) -> float:
    if spec.variant == "H_script":
        return coefficient_norm(np.sqrt(coeffs_mass), u.tau, u.grid, u.T_win, spec, u.window_energy)
    w = _weight_array(spec, u.grid.n, u.grid.L, u.n_t, u.T_win)
    return float(np.sqrt(u.T_win * u.grid.volume * np.sum(w * coeffs_mass) / u.window_energy))


def product_ratios(estimates, u: SpacetimeField, v: SpacetimeField,
                   params: EstimateParams = EstimateParams()) -> dict:
    """Ratios for several estimates sharing one product evaluation."""
    if u.grid != v.grid or u.n_t != v.n_t or u.T_win != v.T_win:
        raise UsageError("space-time fields live on different grids")
    uv = SpacetimeField(u.grid, u.T_win, u.values * v.values, u.window)
    mu, mv, muv = (np.abs(f.coefficients()) ** 2 for f in (u, v, uv))
    out = {}
    for est in estimates:
        nu = _norm(mu, est.first.spec(params), u)
        nv = _norm(mv, est.second.spec(params), v)
        if nu == 0 or nv == 0:
            raise DomainError("product ratio is undefined for a zero input")
        out[est.id] = _norm(muv, est.out.spec(params), uv) / (nu * nv)
    return out


def product_estimate_ratio(est: Estimate | str, u: SpacetimeField, v: SpacetimeField,
                           params: EstimateParams = EstimateParams()) -> float:
    est = lookup_estimate(est) if isinstance(est, str) else est
    return product_ratios([est], u, v, params)[est.id]


# ---------------------------------------------------------------------------
# seeded sample generators

PROFILES = (
    SampleProfile("decay", power=1.5),
    SampleProfile("decay", power=2.0),
    SampleProfile("decay", power=3.0),
    SampleProfile("sparse", power=2.0),
    SampleProfile("shell"),
)


def sample_profile(i: int) -> SampleProfile:
    return PROFILES[i % len(PROFILES)]


def sample_data(grid: Grid3, seed: int, spinor: bool) -> SpinorField | ScalarField:
    """Zero-mean seeded data with a profile that depends on the seed."""
    profile = sample_profile(seed)
    rng = np.random.default_rng(seed)
    kmax = allowed_kmax(grid.n)
    coeffs, _, pick = _master_draws(rng, 1, spinor)
    c = _embed(coeffs[0], grid.n, kmax) * _profile_envelope(profile, grid, kmax, pick)
    c[..., 0, 0, 0] = 0
    if spinor:
        return SpinorField(grid, c, FREQUENCY)
    return ScalarField(grid, c, FREQUENCY)


PAIR_FAMILIES = {"H": (0, 0), "X+": (+1, +1), "X-": (+1, -1)}


def sample_pair(grid: Grid3, seed: int, family: str, T_win: float = 2 * np.pi, n_t: int | None = None):
    """Two seeded scalar superpositions for product probes.

    ``family`` ``H`` mixes half-wave signs per mode; ``X+`` uses plus waves
    for both factors; ``X-`` uses a plus wave and a minus wave.
    """
    n_t = n_t or 2 * grid.n
    rng = np.random.default_rng(seed)
    profile = sample_profile(seed)
    fields = []
    for sign in PAIR_FAMILIES[family]:
        coeffs = synthesize(grid, T_win, n_t, sign, rng, profile)
        fields.append(SpacetimeField.from_coefficients(grid, T_win, coeffs))
    return fields


def _family(est: Estimate) -> str:
    tags = (est.first.tag, est.second.tag)
    if tags == ("X+", "X+"):
        return "X+"
    if tags == ("X+", "X-"):
        return "X-"
    return "H"


# ---------------------------------------------------------------------------
# probes


PROBE_TESTS = ("strichartz", "keybilinear", "products")


@dataclass
class ProbeResult:
    test_id: str
    estimate_id: str | None
    grid: dict
    samples: int
    seed: int
    max_ratio: float
    argmax_seed: int
    floor: float | None
    violations: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            "test_id": self.test_id,
            "estimate_id": self.estimate_id,
            "grid": self.grid,
            "samples": self.samples,
            "seed": self.seed,
            "max_ratio": self.max_ratio,
            "argmax_seed": self.argmax_seed,
            "floor": self.floor,
            "violations": self.violations,
        }
        d.update(self.extra)
        return d


def _grid_info(grid: Grid3, n_t: int, T_win: float) -> dict:
    return {"n": grid.n, "n_t": n_t, "L": grid.L, "T_win": T_win}


def _strichartz_chunk(args):
    n, L, seeds, T_win = args
    grid = Grid3(n, L)
    out = []
    for sd in seeds:
        f = sample_data(grid, sd, spinor=False)
        out.append((sd, strichartz_ratio(f, +1 if sd % 2 == 0 else -1, T_win)))
    return out


def _keybilinear_chunk(args):
    n, L, seeds, T_win, signs, floor = args
    grid = Grid3(n, L)
    out = []
    for sd in seeds:
        psi0 = sample_data(grid, sd, spinor=True)
        out.append((sd, key_bilinear_ratio(psi0, signs, T_win, floor=floor)))
    return out


def _products_chunk(args):
    n, L, seeds, T_win, ids, params = args
    grid = Grid3(n, L)
    ests = [lookup_estimate(i) for i in ids]
    by_family = {}
    for est in ests:
        by_family.setdefault(_family(est), []).append(est)
    out = []
    for sd in seeds:
        row = {}
        for fam, group in sorted(by_family.items()):
            u, v = sample_pair(grid, sd, fam, T_win)
            row.update(product_ratios(group, u, v, params))
        out.append((sd, row))
    return out


def _run_chunks(fn, chunks, jobs: int):
    if jobs <= 1 or len(chunks) <= 1:
        results = [fn(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, chunks))
    merged = []
    for r in results:
        merged.extend(r)
    merged.sort(key=lambda x: x[0])
    return merged


def _split(seeds, jobs):
    jobs = max(1, jobs)
    return [seeds[i::jobs] for i in range(jobs)] if jobs > 1 else [seeds]


def _argmax(pairs):
    """Largest ratio; ties go to the smallest seed so merges are order independent."""
    best_seed, best = None, -math.inf
    for sd, r in pairs:
        if r > best:
            best_seed, best = sd, r
    return best, best_seed


def probe(test_id: str, n: int, samples: int = 100, seed: int = 0, L: float = 2 * np.pi,
          T_win: float = 2 * np.pi, estimate: str | None = None, signs=("+", "+"),
          floor: float | None = None, jobs: int = 1, params: EstimateParams = EstimateParams()):
    """Max ratio over ``samples`` seeded inputs; returns a list of :class:`ProbeResult`.

    ``products`` returns one result per estimate (all of :data:`PROBE_ESTIMATES`
    unless ``estimate`` names one); ``keybilinear`` also reports the maximum
    at half the floor.
    """
    if samples < 1:
        raise UsageError("samples must be >= 1")
    grid = Grid3(n, L)
    n_t = 2 * n
    seeds = list(range(seed, seed + samples))
    info = _grid_info(grid, n_t, T_win)
    if test_id == "strichartz":
        pairs = _run_chunks(_strichartz_chunk, [(n, L, c, T_win) for c in _split(seeds, jobs)], jobs)
        best, arg = _argmax(pairs)
        return [ProbeResult("strichartz", None, info, samples, seed, best, arg, None)]
    if test_id == "keybilinear":
        fl = default_floor(L) if floor is None else floor
        results = {}
        for f in (fl, fl / 2):
            chunks = [(n, L, c, T_win, tuple(signs), f) for c in _split(seeds, jobs)]
            results[f] = _argmax(_run_chunks(_keybilinear_chunk, chunks, jobs))
        best, arg = results[fl]
        half = results[fl / 2]
        sig = "".join(Sign.parse(s).symbol for s in signs)
        return [ProbeResult("keybilinear", sig, info, samples, seed, best, arg, fl,
                            extra={"half_floor": {"floor": fl / 2, "max_ratio": half[0], "argmax_seed": half[1]}})]
    if test_id == "products":
        ids = (estimate,) if estimate else PROBE_ESTIMATES
        ests = [lookup_estimate(i) for i in ids]
        chunks = [(n, L, c, T_win, tuple(e.id for e in ests), params) for c in _split(seeds, jobs)]
        rows = _run_chunks(_products_chunk, chunks, jobs)
        out = []
        for est in ests:
            best, arg = _argmax([(sd, row[est.id]) for sd, row in rows])
            out.append(ProbeResult("products", est.id, info, samples, seed, best, arg, None,
                                   extra={"description": est.describe(params),
                                          "params": {"eps": params.eps, "eps_prime": params.eps_prime,
                                                     "delta": params.delta, "N": params.N}}))
        return out
    raise UsageError(f"unknown probe {test_id!r}; expected one of {PROBE_TESTS}")


def growth(coarse: ProbeResult, fine: ProbeResult) -> float:
    """Relative change of the max ratio from the coarse to the fine grid."""
    return fine.max_ratio / coarse.max_ratio - 1.0


# ---------------------------------------------------------------------------
# null symbol checks


def null_symbol_parallel_report(samples: int = 1000, seed: int = 0) -> dict:
    """Null symbol on the parallel configurations where it must vanish.

    Sign ``+`` vanishes when ``eta`` and ``-zeta`` point the same way;
    sign ``-`` vanishes when ``eta`` and ``zeta`` do.
    """
    from .algebra import null_symbol, random_directions

    rng = np.random.default_rng(seed)
    dirs = random_directions(samples, rng)
    a = np.exp(rng.uniform(-3, 3, (samples, 1)))
    c = np.exp(rng.uniform(-3, 3, (samples, 1)))
    eta = a * dirs
    worst = {}
    for sign, zeta in (("+", -c * dirs), ("-", c * dirs)):
        vals = np.abs(null_symbol(sign, eta, zeta))
        worst[sign] = float(vals.max())
    return {"samples": samples, "seed": seed, "max_abs": worst, "max_abs_overall": max(worst.values())}


def angle_bound_sweep(samples: int = 100_000, seed: int = 0, chunk: int = 50_000) -> dict:
    """``||Pi_+(xi) Pi_-(eta)|| <= theta/2 + theta^2/8`` over random pairs, ``theta`` the angle."""
    from .algebra import angle, angle_bound, operator_norm, projection

    rng = np.random.default_rng(seed)
    done, violations, worst = 0, 0, 0.0
    while done < samples:
        k = min(chunk, samples - done)
        xi = rng.standard_normal((k, 3)) * np.exp(rng.uniform(-3, 3, (k, 1)))
        eta = rng.standard_normal((k, 3)) * np.exp(rng.uniform(-3, 3, (k, 1)))
        norms = operator_norm(projection(+1, xi) @ projection(-1, eta))
        bound = angle_bound(angle(xi, eta))
        violations += int(np.sum(norms > bound * (1 + 1e-12) + 1e-15))
        worst = max(worst, float(np.max(norms - bound)))
        done += k
    return {"samples": samples, "seed": seed, "violations": violations, "max_excess": worst}
