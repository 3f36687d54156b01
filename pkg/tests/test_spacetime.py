import numpy as np
import pytest

from dkglab.fields import Grid3, SpinorField, UsageError, random_spinor
from dkglab.solver import SolverConfig, solve
from dkglab.fields import ScalarState
from dkglab.spacetime import (
    NormSpec, ResolutionError, SampleProfile, SpacetimeField, bilinear_form, coefficient_norm,
    cone_leakage, foliation_norm, free_wave, product, random_xsb, sign_split, spacetime_transform,
    st_norm, time_derivative, window_energy, window_values,
)

from oracles import bilinear_convolution

TWO_PI = 2 * np.pi
G8 = Grid3(8)
LEAK_BAND = 4.0  # time-frequency bins on either side of the cone


def _plane(grid, n_t, tau_index, k, window="rect", T_win=TWO_PI):
    t = np.arange(n_t) * (T_win / n_t)
    x = grid.coordinates()
    phase = sum(kj * grid.dk * xj for kj, xj in zip(k, x))
    vals = np.exp(1j * (TWO_PI / T_win) * tau_index * t)[:, None, None, None] * np.exp(1j * phase)[None]
    return SpacetimeField(grid, T_win, vals, window)


def _random_st(grid, n_t, seed, spinor=False):
    rng = np.random.default_rng(seed)
    shape = (n_t,) + ((4,) if spinor else ()) + grid.shape
    return SpacetimeField(grid, TWO_PI, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def test_window_closed_forms():
    w = window_values("bump", 16)
    assert w[0] == 0 and w[8] == 1.0
    assert np.allclose(w[1:], w[1:][::-1])
    assert window_energy("rect", 16) == 1.0
    with pytest.raises(UsageError):
        window_values("hann", 8)


def test_too_few_time_samples():
    with pytest.raises(ResolutionError):
        SpacetimeField(G8, 1.0, np.zeros((4,) + G8.shape))


def test_spacetime_parseval():
    u = _random_st(G8, 16, 0, spinor=True)
    assert st_norm(u, NormSpec(0, 0, variant="H_sb")) == pytest.approx(u.l2_norm(), rel=1e-10)
    back = SpacetimeField.from_coefficients(G8, TWO_PI, u.coefficients())
    assert np.max(np.abs(back.values - u.values)) < 1e-12


def test_constant_field_sits_at_zero_frequency():
    u = SpacetimeField(G8, 3.0, 2.0 * np.ones((8,) + G8.shape))
    c = u.coefficients()
    assert c[0, 0, 0, 0] == pytest.approx(2.0)
    c[0, 0, 0, 0] = 0
    assert np.max(np.abs(c)) < 1e-14


def test_plane_wave_bump_leakage():
    u = _plane(G8, 32, 3, (1, 0, 0), window="bump")
    c = np.abs(u.coefficients()) ** 2
    near = np.abs(u.tau - 3) <= LEAK_BAND
    assert c[~near].sum() / c.sum() < 1e-3
    assert c[:, 1, 0, 0].sum() == pytest.approx(c.sum(), rel=1e-14)


def test_single_mode_norms():
    g = G8
    u = _plane(g, 16, 2, (1, 2, 2))  # |k| = 3 on the unit-spacing lattice
    mass = np.sqrt(TWO_PI * g.volume)
    assert st_norm(u, NormSpec(0.7, 0.4, +1)) == pytest.approx(4**0.7 * 6**0.4 * mass, rel=1e-12)
    assert st_norm(u, NormSpec(0.7, 0.4, -1)) == pytest.approx(4**0.7 * 2**0.4 * mass, rel=1e-12)
    assert st_norm(u, NormSpec(1.0, 1.0, variant="H_sb")) == pytest.approx(4 * 2 * mass, rel=1e-12)


@pytest.mark.parametrize("sign", [+1, -1])
def test_free_wave_norm_independent_of_b(sign):
    g = G8
    c = np.zeros((4,) + g.shape, complex)
    for k in [(1, 0, 0), (0, 2, 0), (1, 2, 2), (0, 3, 0)]:  # integer |k|, so the cone hits the time grid
        c[(slice(None),) + k] = np.arange(1, 5)
    f = SpinorField(g, c, "frequency")
    u = free_wave(f, sign, TWO_PI, 16, window="rect")
    norms = [st_norm(u, NormSpec(0, b, sign)) for b in (0, 0.5, 1.3)]
    assert np.allclose(norms, norms[0], rtol=1e-12)
    assert norms[0] == pytest.approx(np.sqrt(TWO_PI) * np.sqrt(g.volume * np.sum(np.abs(c) ** 2)), rel=1e-12)
    assert cone_leakage(u, sign, 1e-9) < 1e-25


@pytest.mark.parametrize("sign", [+1, -1])
def test_free_wave_cone_support_with_taper(sign):
    rng = np.random.default_rng(3)
    f = random_spinor(G8, rng, zero_mean=True)
    u = free_wave(f, sign, TWO_PI, 32)
    assert cone_leakage(u, sign, LEAK_BAND) < 1e-3
    assert cone_leakage(u, -sign, 1.0) > 0.9
    charges = [np.sum(np.abs(v) ** 2) for v in u.values]
    assert np.allclose(charges, charges[0], rtol=1e-12)


def test_h_norm_below_x_norm_and_sign_split():
    rng = np.random.default_rng(4)
    for _ in range(5):
        u = _random_st(G8, 16, int(rng.integers(1 << 30)))
        for s, b in [(0.3, 0.6), (-0.5, 0.2), (1.0, 1.0)]:
            h = st_norm(u, NormSpec(s, b, variant="H_sb"))
            xp = st_norm(u, NormSpec(s, b, +1))
            xm = st_norm(u, NormSpec(s, b, -1))
            assert h <= min(xp, xm) * (1 + 1e-12)
            cp, cm = sign_split(u)
            parts = [coefficient_norm(cp, u.tau, G8, u.T_win, NormSpec(s, b, +1)),
                     coefficient_norm(cm, u.tau, G8, u.T_win, NormSpec(s, b, -1))]
            assert h == pytest.approx(np.hypot(*parts), rel=1e-12)


def test_norm_monotone_in_s_and_b():
    u = _random_st(G8, 16, 5)
    ss = [st_norm(u, NormSpec(s, 0.5, +1)) for s in (-1, 0, 0.5, 1)]
    bs = [st_norm(u, NormSpec(0.5, b, +1)) for b in (0, 0.25, 0.5, 1)]
    assert all(np.diff(ss) > 0) and all(np.diff(bs) > 0)


def test_script_norm_adds_time_derivative():
    u = _random_st(G8, 16, 6)
    s, b = 0.5, 0.5
    h = st_norm(u, NormSpec(s, b, variant="H_sb"))
    dt = st_norm(time_derivative(u), NormSpec(s - 1, b, variant="H_sb"))
    assert st_norm(u, NormSpec(s, b, variant="H_script")) == pytest.approx(h + dt, rel=1e-12)


def test_spacetime_transform_from_trajectory():
    g = G8
    cfg = SolverConfig(g, M=0, m=0, g=0, dt=TWO_PI / 128, T=TWO_PI * 15 / 16)
    c = np.zeros((4,) + g.shape, complex)
    c[:, 1, 0, 0] = [1, 0, 0, 1]  # eigenvector of Pi_+ at k = e1
    tr = solve(cfg, (SpinorField(g, c, "frequency"), ScalarState.zeros(g)), stride=8)
    u = spacetime_transform(tr.states, window="rect")
    assert u.n_t == 16 and u.T_win == pytest.approx(TWO_PI)
    coeff = u.coefficients()
    assert np.abs(coeff[-1, 0, 1, 0, 0]) == pytest.approx(1.0, rel=1e-10)  # tau = -|xi| = -1
    with pytest.raises(ResolutionError):
        spacetime_transform(tr.states[:5])
    bad = list(tr.states)
    bad[3] = bad[4]
    with pytest.raises(ResolutionError):
        spacetime_transform(bad)


def test_random_xsb_hits_target_norm():
    g = Grid3(16)
    spec = NormSpec(0.3, 0.6, +1)
    for seed in range(3):
        for profile in (SampleProfile(), SampleProfile("sparse", 1.5), SampleProfile("shell")):
            u = random_xsb(spec, seed, g, profile=profile)
            assert st_norm(u, spec) == pytest.approx(1.0, rel=0.05)
            assert foliation_norm(u.coefficients(), g, u.T_win, +1, 0.3, 0.6) == pytest.approx(1.0, rel=1e-10)


def test_random_xsb_single_layer_zero_modulation_is_free_wave():
    g = Grid3(16)
    u = random_xsb(NormSpec(0, 0.5, -1), 7, g, T_win=TWO_PI, profile=SampleProfile(layers=1, lam_scale=0))
    # all mass within half a time-frequency bin of the minus cone
    assert cone_leakage(u, -1, 0.5 + 1e-12) < 1e-28


def test_random_xsb_seeds_decorrelate():
    g = Grid3(16)
    spec = NormSpec(0, 0.5, +1)
    a = random_xsb(spec, 1, g).coefficients().ravel()
    b = random_xsb(spec, 2, g).coefficients().ravel()
    assert abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)) < 0.1


def test_random_xsb_requires_sign():
    with pytest.raises(UsageError):
        random_xsb(NormSpec(0, 0.5, variant="H_sb"), 0, G8)


@pytest.mark.parametrize("n", [4, 8])
@pytest.mark.parametrize("signs", [(1, 1), (1, -1), (-1, 1), (-1, -1)])
def test_bilinear_form_matches_convolution_oracle(n, signs):
    g = Grid3(n)
    rng = np.random.default_rng(n)
    shape = (8, 4) + g.shape
    psi = SpacetimeField(g, 1.0, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    phi = SpacetimeField(g, 1.0, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    got = np.fft.fftn(bilinear_form(psi, phi, signs).values, axes=(1, 2, 3)) / n**3
    want = bilinear_convolution(psi.values[:2], phi.values[:2], g, *signs)
    assert np.max(np.abs(got[:2] - want)) < 1e-12 * max(1.0, np.max(np.abs(want)))


def _mode_field(g, k, spinor):
    x = g.coordinates()
    phase = np.exp(1j * sum(kj * g.dk * xj for kj, xj in zip(k, x)))
    vals = np.asarray(spinor).reshape(1, 4, 1, 1, 1) * phase[None, None]
    return SpacetimeField(g, 1.0, np.broadcast_to(vals, (8, 4) + g.shape))


def test_bilinear_form_vanishes_in_null_configurations():
    g = G8
    v, w = np.array([1, 0.5j, -0.3, 0.2]), np.array([0.1, 1, 0.4j, -0.7])
    psi = _mode_field(g, (1, 1, 0), v)
    same = _mode_field(g, (2, 2, 0), w)
    opposite = _mode_field(g, (-2, -2, 0), w)

    def size(a, b, signs):
        return np.max(np.abs(bilinear_form(a, b, signs).values))

    # equal signs on parallel frequencies, opposite signs on antiparallel ones
    assert size(psi, same, (1, 1)) < 1e-14 and size(psi, same, (-1, -1)) < 1e-14
    assert size(psi, opposite, (1, -1)) < 1e-14 and size(psi, opposite, (-1, 1)) < 1e-14
    assert size(psi, same, (1, -1)) > 0.1 and size(psi, opposite, (1, 1)) > 0.1


def test_bilinear_form_density_of_upper_spinor():
    g = G8
    rng = np.random.default_rng(9)
    vals = rng.standard_normal((8, 4) + g.shape) + 1j * rng.standard_normal((8, 4) + g.shape)
    vals[:, 2:] = 0
    psi = SpacetimeField(g, 1.0, vals)
    total = sum(bilinear_form(psi, psi, (s1, s2)).values for s1 in (1, -1) for s2 in (1, -1))
    assert np.allclose(total, np.abs(vals[:, 0]) ** 2 + np.abs(vals[:, 1]) ** 2, atol=1e-12)


def test_bilinear_form_grid_mismatch():
    a = SpacetimeField(G8, 1.0, np.zeros((8, 4) + G8.shape))
    b = SpacetimeField(G8, 2.0, np.zeros((8, 4) + G8.shape))
    with pytest.raises(UsageError):
        bilinear_form(a, b, (1, 1))


def test_product_is_pointwise():
    u = _random_st(G8, 8, 1)
    v = _random_st(G8, 8, 2)
    assert np.array_equal(product(u, v).values, u.values * v.values)
