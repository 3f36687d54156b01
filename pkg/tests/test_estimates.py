import math
import re

import numpy as np
import pytest

from dkglab.algebra import DomainError
from dkglab.fields import Grid3, ScalarField, SpinorField, UsageError
from dkglab.estimates import (
    COMPARABILITY_BOUNDS, PROBE_ESTIMATES, REGISTRY, AdmissibilityError, EstimateParams,
    angle_bound_sweep, default_floor, growth, key_bilinear_ratio, key_bilinear_single_mode,
    km_admissible, lookup_estimate, null_symbol_parallel_report, probe, product_estimate_ratio,
    product_ratios, sample_data, sample_pair, strichartz_ratio, strichartz_single_mode,
    weight_checks, weight_sweep,
)
from dkglab.spacetime import SpacetimeField

TWO_PI = 2 * np.pi


def _tuple(tau, lam, xi, eta):
    return np.array([tau], float), np.array([lam], float), np.array([xi], float), np.array([eta], float)


def test_on_cone_configuration_is_sharp():
    rep = weight_checks(*_tuple(0.0, -1.0, (2, 0, 0), (1, 0, 0)))
    assert rep.total_violations == 0
    # identity (a) reads 4 = 4 at theta_plus = pi
    assert rep.max_rel_error_a < 1e-15


def test_modulation_bound_equality():
    xi, eta = np.array([2.0, 0, 0]), np.array([1.0, 0, 0])
    r_plus = np.linalg.norm(xi) - abs(np.linalg.norm(eta) - np.linalg.norm(eta - xi))
    rhs = abs(0 - 2) + abs(-1 + 1) + abs(-1 - 0 + 1)
    assert r_plus == rhs == 2


def test_degenerate_tuples_are_skipped():
    rep = weight_checks(np.zeros(3), np.zeros(3), np.array([[1.0, 0, 0]] * 3),
                        np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]))
    assert rep.degenerate == 2 and rep.tuples == 1


def test_weight_sweep_has_no_violations():
    rep = weight_sweep(50_000, seed=11)
    assert rep.total_violations == 0, rep.as_dict()
    lo, hi = rep.comparability_range
    assert COMPARABILITY_BOUNDS[0] * (1 - 1e-6) <= lo and hi <= COMPARABILITY_BOUNDS[1] * (1 + 1e-6)
    assert rep.max_rel_error_a < 1e-9 and rep.max_rel_error_b < 1e-9


def test_weight_report_merge():
    rep = weight_checks(*_tuple(0.0, -1.0, (2, 0, 0), (1, 0, 0)))
    merged = rep.merge(rep)
    assert merged.tuples == 2 and merged.total_violations == 0


@pytest.mark.parametrize("k,L", [((1, 0, 0), TWO_PI), ((1, 2, 2), TWO_PI), ((0, 3, 1), 3.0)])
def test_strichartz_single_mode_closed_form(k, L):
    g = Grid3(8, L)
    f = ScalarField.plane_wave(g, k)
    T = 1.7
    assert strichartz_ratio(f, +1, T) == pytest.approx(strichartz_single_mode(k, L, T), rel=1e-12)
    assert strichartz_ratio(f, -1, T) == pytest.approx(strichartz_single_mode(k, L, T), rel=1e-12)


def test_strichartz_homogeneous_and_preconditions():
    g = Grid3(16)
    f = sample_data(g, 3, spinor=False)
    r = strichartz_ratio(f, +1)
    assert strichartz_ratio(ScalarField(g, 2 * f.values, f.rep), +1) == pytest.approx(r, rel=1e-12)
    with pytest.raises(DomainError):
        strichartz_ratio(ScalarField(g, np.ones(g.shape)), +1)
    with pytest.raises(DomainError):
        strichartz_ratio(ScalarField(g, np.zeros(g.shape)), +1)


def test_key_bilinear_single_mode_oracle():
    g = Grid3(8)
    k = (1, 2, 2)  # |xi| = 3, so the output sits exactly on the time-frequency grid
    v = np.array([1.0, 0.3j, -0.5, 0.2 + 0.1j])
    psi = SpinorField.plane_wave(g, k, v)
    got = key_bilinear_ratio(psi, ("+", "-"), T_win=TWO_PI, window="rect")
    assert got == pytest.approx(key_bilinear_single_mode(k, v, g.L, TWO_PI), rel=1e-12)
    assert key_bilinear_ratio(psi, ("+", "+"), window="rect") < 1e-15
    scaled = SpinorField(g, 3j * psi.values, psi.rep)
    assert key_bilinear_ratio(scaled, ("+", "-")) == pytest.approx(key_bilinear_ratio(psi, ("+", "-")), rel=1e-12)


def test_key_bilinear_floor_and_zero_data():
    g = Grid3(8)
    assert default_floor(g.L) == pytest.approx(1.0)
    psi = sample_data(g, 1, spinor=True)
    loose = key_bilinear_ratio(psi, ("+", "+"), floor=default_floor(g.L))
    tight = key_bilinear_ratio(psi, ("+", "+"), floor=default_floor(g.L) / 2)
    assert tight >= loose
    with pytest.raises(DomainError):
        key_bilinear_ratio(SpinorField.zeros(g))


@pytest.mark.parametrize("exps,condition", [
    ((1, 1, -1), "s1, s2, s3 < 1"),
    ((0.1, 0.2, 0.7), "s1+s2 > 1/2"),
    ((0.5, 0.5, 0.5), "s1+s2+s3 = 1"),
    ((0.9, -0.2, 0.3), "s1, s2, s3 >= 0"),
])
def test_km_gate_names_the_violated_condition(exps, condition):
    assert km_admissible(*exps) == condition
    with pytest.raises(AdmissibilityError, match=re.escape(condition)):
        lookup_estimate("KM({},{},{})".format(*exps))


def test_km_gate_accepts_admissible():
    assert km_admissible(0.5, 0.5, 0) is None
    est = lookup_estimate("KM(0.25, 0.5, 0.25)")
    assert est.id == "KM(0.25,0.5,0.25)"


def test_registry_contents():
    assert len(REGISTRY) == 29
    for family, count in [("interp-", 5), ("null-pp-", 3), ("null-pm-", 3), ("reduced-", 6), ("dual-pp-", 3), ("dual-pm-", 6)]:
        assert sum(k.startswith(family) for k in REGISTRY) == count
    for est in REGISTRY.values():
        assert "->" in est.describe()
    with pytest.raises(UsageError):
        lookup_estimate("interp-9")
    assert set(PROBE_ESTIMATES) <= set(REGISTRY)


def test_interp_exponents_at_default_parameters():
    p = EstimateParams()
    est = REGISTRY["interp-1"]
    assert est.first.spec(p).b == pytest.approx(0.49)
    assert est.second.spec(p).s == pytest.approx(0.6)
    assert est.second.spec(p).b == pytest.approx(0.51)
    assert est.out.spec(p).s == pytest.approx(-0.5)


def _unit_mode(g, n_t, j, k):
    c = np.zeros((n_t,) + g.shape, complex)
    c[(j % n_t,) + tuple(x % g.n for x in k)] = 1.0
    return SpacetimeField.from_coefficients(g, TWO_PI, c)


def test_product_ratio_single_mode_oracle():
    g = Grid3(16)
    n_t = 32
    u = _unit_mode(g, n_t, 2, (1, 1, 0))
    ratio = product_estimate_ratio("KM(0.5,0.5,0)", u, u)
    # H^{1/2, 1/2+eps'} . H^{1/2, 1/2+eps'} -> H^{0,0}; the product is the unit mode at (4, (2,2,0))
    b = 0.51
    xi = math.sqrt(2)
    w_in = (1 + xi) ** 1 * (1 + abs(2 - xi)) ** (2 * b)
    expected = 1 / (math.sqrt(TWO_PI * g.volume) * w_in)
    assert ratio == pytest.approx(expected, rel=1e-12)


def test_product_ratios_scale_invariant():
    g = Grid3(16)
    u, v = sample_pair(g, 4, "H")
    base = product_ratios([REGISTRY[i] for i in PROBE_ESTIMATES], u, v)
    u2 = SpacetimeField(g, u.T_win, 5.0 * u.values, u.window)
    v2 = SpacetimeField(g, v.T_win, -0.1j * v.values, v.window)
    again = product_ratios([REGISTRY[i] for i in PROBE_ESTIMATES], u2, v2)
    for k in base:
        assert again[k] == pytest.approx(base[k], rel=1e-12)


def test_sample_data_zero_mean_and_resolution_consistent():
    for seed in range(10):
        f = sample_data(Grid3(16), seed, spinor=False)
        c = f.coefficients()
        assert c[0, 0, 0] == 0 and np.max(np.abs(c)) > 0
    for seed in (0, 1, 2):  # power-law profiles share their low modes across resolutions
        a = sample_data(Grid3(16), seed, spinor=True).coefficients()
        b = sample_data(Grid3(32), seed, spinor=True).coefficients()
        for k in [(1, 0, 0), (2, -1, 3), (-3, 3, 0)]:
            assert np.array_equal(a[(slice(None),) + k], b[(slice(None),) + k])


def test_probe_report_schema():
    res = probe("keybilinear", 8, samples=3, seed=5)
    d = res[0].as_dict()
    for key in ("test_id", "estimate_id", "grid", "samples", "seed", "max_ratio", "argmax_seed", "floor", "violations"):
        assert key in d
    assert set(d["grid"]) == {"n", "n_t", "L", "T_win"}
    assert d["half_floor"]["floor"] == pytest.approx(d["floor"] / 2)
    assert 5 <= d["argmax_seed"] < 8


def test_probe_parallel_merge_is_deterministic():
    serial = [r.as_dict() for r in probe("products", 8, samples=6, seed=2, jobs=1)]
    parallel = [r.as_dict() for r in probe("products", 8, samples=6, seed=2, jobs=3)]
    assert serial == parallel


def test_probe_rejects_unknown_test_and_growth():
    with pytest.raises(UsageError):
        probe("nope", 8)
    a, b = probe("strichartz", 8, samples=2)[0], probe("strichartz", 8, samples=2)[0]
    assert growth(a, b) == 0.0


def test_null_symbol_parallel_report_is_exact():
    rep = null_symbol_parallel_report(2000, seed=1)
    assert rep["max_abs_overall"] <= 1e-14


def test_angle_bound_sweep_small():
    rep = angle_bound_sweep(20_000, seed=2)
    assert rep["violations"] == 0 and rep["max_excess"] <= 0

