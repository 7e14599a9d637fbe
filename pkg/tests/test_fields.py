import numpy as np
import pytest

from gcwaves.errors import ConfigError, SingularMultiplierError
from gcwaves.fields import (FourierField, Grid, analyze, apply_multiplier,
                            bump, dealias, dx, inner, l2_norm, load_snapshot,
                            lp_gt, lp_leq, lp_project, mean, phi_le, phi_gt,
                            phi_shell, pointwise_product, random_field,
                            save_snapshot, sobolev_norm, synthesize)

TWO_PI = 2.0 * np.pi


def test_grid_validation():
    with pytest.raises(ConfigError):
        Grid(3)
    with pytest.raises(ConfigError):
        Grid(10, dealias_fraction=0.0)
    assert Grid(64).kmax_dealias == 21  # 3 * 21 < 64: alias-free products


def test_bump_support_and_plateau():
    r = np.linspace(-3, 3, 2001)
    v = bump(r)
    assert np.all((0.0 <= v) & (v <= 1.0))
    assert np.all(v[np.abs(r) <= 5 / 4] == 1.0)
    assert np.all(v[np.abs(r) >= 8 / 5] == 0.0)
    assert np.allclose(v, bump(-r))


def test_bump_smoothness_sampled_differences():
    # all sampled finite differences stay bounded through 4th order
    h = 1e-3
    r = np.arange(1.2, 1.7, h)
    v = bump(r)
    d = v
    for order in range(1, 5):
        d = np.diff(d) / h
        assert np.all(np.isfinite(d))
        assert np.max(np.abs(d)) < 1e4 ** order


def test_roundtrip_identity():
    g = Grid(16)
    f = random_field(g, seed=1)
    back = analyze(synthesize(f), g)
    assert np.max(np.abs(back.coeffs - f.coeffs)) <= 1e-12 * np.max(np.abs(f.coeffs))


def test_parseval_single_mode():
    g = Grid(16)
    f = FourierField.single_mode(g, (1, 0))
    assert l2_norm(f) == pytest.approx(TWO_PI, rel=1e-14)


def test_real_flag_detected_from_samples():
    g = Grid(16)
    rng = np.random.default_rng(0)
    f = analyze(rng.standard_normal((16, 16)), g)
    assert f.is_real_valued
    assert np.isrealobj(synthesize(f))


def test_lp_vanishes_for_negative_k():
    g = Grid(16)
    f = random_field(g, seed=2, mean_zero=False)
    for k in (-1, -2, -5):
        assert np.all(lp_project(f, k).coeffs == 0.0)


def test_lp_partition_of_unity():
    r = np.linspace(0.0, 50.0, 701)
    assert np.allclose(phi_le(r, 3) + phi_gt(r, 3), 1.0, atol=1e-15)


def test_lp_telescoping():
    r = np.linspace(0.0, 40.0, 1001)
    tot = sum(phi_shell(r, k) for k in range(0, 7))
    assert np.max(np.abs(tot - (phi_le(r, 6) - phi_le(r, -1)))) <= 1e-15


def test_mean_is_average_operator():
    g = Grid(16)
    f = random_field(g, seed=3, mean_zero=False, real=True)
    assert mean(f) == pytest.approx(float(np.mean(synthesize(f))), rel=1e-12)


def test_multiplier_half_derivative_on_single_mode():
    g = Grid(16)
    f = FourierField.single_mode(g, (1, 0))
    out = apply_multiplier(f, lambda k1, k2: np.hypot(k1, k2) ** 0.5)
    assert np.max(np.abs(out.coeffs - f.coeffs)) <= 1e-14 * TWO_PI ** 2


def test_multiplier_dispersion_on_mode():
    from gcwaves.dispersion import DispersionParams, lam_grid

    g = Grid(16)
    p = DispersionParams(1.0, 1.0)
    f = FourierField.single_mode(g, (2, 0))
    out = apply_multiplier(f, lambda k1, k2: lam_grid(p, k1, k2))
    assert out.coeffs[2, 0] == pytest.approx(np.sqrt(10) * TWO_PI ** 2, rel=1e-14)


def test_singular_multiplier_rejects_nonzero_mean():
    g = Grid(16)
    const = FourierField.single_mode(g, (0, 0), 1.0)
    with pytest.raises(SingularMultiplierError):
        apply_multiplier(const, lambda k1, k2: np.hypot(k1, k2) ** -0.5)
    # zero-mean input passes
    f = random_field(g, seed=4)
    apply_multiplier(f, lambda k1, k2: np.hypot(k1, k2) ** -0.5)


def test_sobolev_single_mode():
    g = Grid(16)
    f = FourierField.single_mode(g, (1, 0))
    for s in (0.5, 1.0, 2.5):
        assert sobolev_norm(f, s) == pytest.approx(TWO_PI * 2 ** (s / 2), rel=1e-14)


def test_sobolev_zero_is_l2():
    g = Grid(16)
    f = random_field(g, seed=5)
    assert sobolev_norm(f, 0.0) == pytest.approx(l2_norm(f), rel=1e-14)


def test_norm_triangle_inequality():
    g = Grid(16)
    for seed in range(5):
        f = random_field(g, seed=seed)
        h = random_field(g, seed=seed + 50)
        for s in (0.0, 1.5):
            assert sobolev_norm(f + h, s) <= sobolev_norm(f, s) + sobolev_norm(h, s) + 1e-13


def test_conjugate_symmetry_under_real_even_multipliers():
    g = Grid(16)
    f = random_field(g, seed=6, real=True)
    out = apply_multiplier(f, lambda k1, k2: 1.0 + np.hypot(k1, k2) ** 2)
    assert out.is_real_valued
    assert np.max(np.abs(np.imag(synthesize(out)))) == 0.0  # real synthesis path


def test_projection_commutes_with_multiplier():
    g = Grid(16)
    f = random_field(g, seed=7)
    m = lambda k1, k2: np.exp(1j * k1) * (1.0 + k2 ** 2)
    a = lp_project(apply_multiplier(f, m), 2)
    b = apply_multiplier(lp_project(f, 2), m)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-13 * np.max(np.abs(f.coeffs))


def test_parseval_after_projections():
    g = Grid(32)
    f = random_field(g, seed=8)
    pieces = [lp_project(f, k) for k in range(0, 6)]
    low = lp_leq(f, -1)
    total = sum(l2_norm(p) ** 2 for p in pieces) + l2_norm(low) ** 2
    # shells + the (vanishing, mean-zero) low part reconstruct P_{<=5} f
    assert total <= (l2_norm(f) * (1 + 1e-12)) ** 2
    recon = pieces[0]
    for p in pieces[1:]:
        recon = recon + p
    assert np.max(np.abs(recon.coeffs - lp_leq(f, 5).coeffs)) <= 1e-13 * np.max(np.abs(f.coeffs))


def test_dealias_product_is_exact_convolution():
    # with K = kmax_dealias and 3K < M, retained modes of the pointwise grid
    # product equal the exact convolution sum (no aliasing)
    g = Grid(16)
    f = random_field(g, seed=9, real=True)
    h = random_field(g, seed=10, real=True)
    prod = pointwise_product(f, h)
    km = g.kmax_dealias
    m = g.size
    for x1 in range(-km, km + 1):
        for x2 in range(-km, km + 1):
            conv = 0.0j
            for e1 in range(-km, km + 1):
                for e2 in range(-km, km + 1):
                    r1, r2 = x1 - e1, x2 - e2
                    if abs(r1) <= km and abs(r2) <= km:
                        conv += f.coeffs[r1 % m, r2 % m] * h.coeffs[e1 % m, e2 % m]
            conv /= TWO_PI ** 2
            assert abs(prod.coeffs[x1 % m, x2 % m] - conv) <= 1e-12 * (1 + abs(conv))


def test_snapshot_roundtrip(tmp_path):
    g = Grid(16)
    f = random_field(g, seed=11)
    save_snapshot(f, str(tmp_path / "snap"), time=1.25, name="probe")
    back, header = load_snapshot(str(tmp_path / "snap"))
    assert header["time"] == 1.25
    assert back.grid == g
    assert np.max(np.abs(back.coeffs - f.coeffs)) <= 1e-15 * np.max(np.abs(f.coeffs))


def test_inner_product_matches_quadrature():
    g = Grid(16)
    f = random_field(g, seed=12)
    h = random_field(g, seed=13)
    quad = np.sum(synthesize(f) * np.conj(synthesize(h))) * (TWO_PI / 16) ** 2
    assert inner(f, h) == pytest.approx(complex(quad), rel=1e-12)
