"""Grid, transform, norm, random-data, and serialization checks."""

import io
import math

import numpy as np
import pytest

from kplab.errors import (
    BandExceedsGridError,
    ExponentRangeError,
    InvalidSpecError,
    ShapeMismatchError,
)
from kplab.fields import (
    BandSpec,
    GridSpec,
    NormSpec,
    SpaceTimeField,
    SpectralField,
    bourgain_norm,
    field_norm,
    field_to_csv,
    load_field,
    make_grid,
    mixed_norm,
    product_exact,
    project_mean_zero,
    quadratic_product,
    random_field,
    save_field,
    sobolev_norm,
    st_from_physical,
    st_random_field,
    st_to_physical,
    to_physical,
    to_spectral,
)
from kplab.symbols import DispersionParams, phase_grid

P2 = DispersionParams(2.0, 1)


def small_grid(**kw):
    args = dict(kMax=8, yPoints=32, yLength=16 * math.pi, yDims=1,
                tPoints=16, tWindow=2.0)
    args.update(kw)
    return make_grid(**args)


def test_make_grid_derived_spacings():
    g = make_grid(32, 128, 64 * math.pi, tPoints=64, tWindow=4.0)
    assert g.deta == pytest.approx(1.0 / 32.0)
    assert g.dtau == pytest.approx(math.pi / 4.0)
    assert g.nx == 65


def test_make_grid_rejects_bad_specs():
    with pytest.raises(InvalidSpecError) as err:
        make_grid(8, 100, 16 * math.pi)
    assert any("yPoints" in v for v in err.value.violations)
    with pytest.raises(InvalidSpecError) as err:
        make_grid(8, 32, 16 * math.pi, yDims=3)
    assert any("yDims" in v for v in err.value.violations)
    # all violations reported at once
    with pytest.raises(InvalidSpecError) as err:
        GridSpec(kMax=0, yPoints=100, yLength=-1.0, yDims=3, tPoints=7, tWindow=0.0)
    assert len(err.value.violations) == 6


def test_project_mean_zero():
    g = small_grid()
    c = np.zeros(g.spatial_shape, complex)
    c[0, 3] = 2.0  # k = 0 content only
    f = SpectralField(g, c)
    z = project_mean_zero(f)
    assert np.all(z.coeffs == 0)

    f = random_field(g, BandSpec(1, 5, 1.5), seed=1)
    p1 = project_mean_zero(f)
    p2 = project_mean_zero(p1)
    assert np.array_equal(p1.coeffs, p2.coeffs)

    mixed = SpectralField(g, f.coeffs + c)
    proj = project_mean_zero(mixed)
    assert np.all(proj.coeffs[0] == 0)
    assert np.array_equal(proj.coeffs[1:], mixed.coeffs[1:])


def test_transform_single_harmonic_concentrates():
    g = small_grid()
    x = g.x_axis()[:, None]
    y = g.y_axis()[None, :]
    u = np.cos(x) * np.exp(-((y / 5.0) ** 2))
    f = to_spectral(u, g)
    mask = np.abs(g.k_axis()) == 1
    energy = np.sum(np.abs(f.coeffs) ** 2)
    assert np.sum(np.abs(f.coeffs[mask]) ** 2) / energy > 1.0 - 1e-12


def test_transform_round_trip_and_parseval():
    g = small_grid()
    f = random_field(g, BandSpec(1, 8, 1.9), seed=7)
    u = to_physical(f)
    back = to_spectral(u, g)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-12

    phys = (2 * math.pi / g.nx) * g.dy * np.sum(np.abs(u) ** 2)
    spec = g.xy_measure * np.sum(np.abs(f.coeffs) ** 2)
    assert phys == pytest.approx(spec, rel=1e-12)


def test_transform_shape_mismatch():
    g = small_grid()
    with pytest.raises(ShapeMismatchError):
        to_spectral(np.zeros((3, 3)), g)
    with pytest.raises(ShapeMismatchError):
        st_from_physical(np.zeros((3, 3, 3)), g)


def test_spacetime_round_trip():
    g = small_grid()
    F = st_random_field(g, BandSpec(1, 6, 1.5), seed=2)
    samples = st_to_physical(F)
    assert np.max(np.abs(samples.imag)) < 1e-12  # Hermitian data is real
    back = st_from_physical(samples, g)
    assert np.max(np.abs(back.coeffs - F.coeffs)) < 1e-12
    phys = g.dt * (2 * math.pi / g.nx) * g.dy * np.sum(np.abs(samples) ** 2)
    assert phys == pytest.approx(F.l2_norm() ** 2, rel=1e-12)


def test_sobolev_single_mode_and_l2():
    g = small_grid()
    c = np.zeros(g.spatial_shape, complex)
    c[1, 0] = 1.0
    f = SpectralField(g, c)
    for s1 in (0.0, 0.5, 1.25):
        assert sobolev_norm(f, s1, 0.0) == pytest.approx(
            2 ** (s1 / 2) * math.sqrt(g.xy_measure), rel=1e-13
        )
    f = random_field(g, BandSpec(1, 6, 1.5), seed=3)
    assert sobolev_norm(f, 0.0, 0.0) == pytest.approx(f.l2_norm(), rel=1e-13)
    scaled = SpectralField(g, 3.7 * f.coeffs)
    assert sobolev_norm(scaled, 0.4, 0.2) == pytest.approx(
        3.7 * sobolev_norm(f, 0.4, 0.2), rel=1e-13
    )


def grid_tau_integer():
    # tWindow = pi makes the tau lattice the integers: phi(1, 0) = 1 is on it
    return make_grid(4, 16, 8 * math.pi, tPoints=16, tWindow=math.pi)


def test_bourgain_atom_on_surface_independent_of_b():
    g = grid_tau_integer()
    gc = np.zeros(g.st_shape, complex)
    p_idx = 1  # tau = 1
    gc[p_idx, 1, 0] = 1.0
    F = SpaceTimeField(g, gc)
    sigma = g.tau_axis()[p_idx] - phase_grid(P2, 1.0, 0.0)
    assert sigma == pytest.approx(0.0, abs=1e-14)
    vals = [
        bourgain_norm(F, NormSpec(flavor="x", s1=0.3, s2=0.2, b=b), P2)
        for b in (-0.5, 0.0, 0.7)
    ]
    expected = 2 ** (0.3 / 2) * math.sqrt(g.st_measure)
    for v in vals:
        assert v == pytest.approx(expected, rel=1e-12)


def test_bourgain_zero_exponents_is_l2():
    g = small_grid()
    F = st_random_field(g, BandSpec(1, 6, 1.5), seed=5)
    assert bourgain_norm(F, NormSpec(flavor="x"), P2) == pytest.approx(
        F.l2_norm(), rel=1e-12
    )


def test_bourgain_weight_factor_direct_substitution():
    g = grid_tau_integer()
    gc = np.zeros(g.st_shape, complex)
    gc[5, 2, 3] = 1.3
    F = SpaceTimeField(g, gc)
    plain = bourgain_norm(F, NormSpec(flavor="x", s1=0.2, s2=0.1, b=0.4), P2)
    weighted = bourgain_norm(
        F, NormSpec(flavor="xweighted", s1=0.2, s2=0.1, b=0.4, beta=0.6), P2
    )
    sigma = g.tau_axis()[5] - phase_grid(P2, 2.0, (3 * g.deta) ** 2)
    bs = math.sqrt(1 + sigma**2)
    factor = (1.0 + bs / (1 + 2**2) ** ((P2.alpha + 1) / 2)) ** 0.6
    assert weighted / plain == pytest.approx(factor, rel=1e-12)
    # at <sigma> = <k>^(alpha+1) the factor is exactly 2^beta
    assert (1.0 + 1.0) ** 0.6 == pytest.approx(2**0.6)


def test_z_norm_is_sum_of_parts_recomputed_independently():
    g = small_grid()
    F = st_random_field(g, BandSpec(1, 6, 1.5), seed=6)
    spec = NormSpec(flavor="z", s1=0.3, s2=0.1, beta=0.25)
    z = bourgain_norm(F, spec, P2)
    y = bourgain_norm(F, NormSpec(flavor="y", s1=0.3, s2=0.1, beta=0.25), P2)
    xw = bourgain_norm(
        F, NormSpec(flavor="xweighted", s1=0.3, s2=0.1, b=-0.5, beta=0.25), P2
    )
    assert z == y + xw

    # independent recomputation of the y part with plain loops
    phi = np.empty((g.nx,) + (g.yPoints,))
    karr = g.k_axis()
    eta = g.eta_axis()
    acc = 0.0
    for ki, k in enumerate(karr):
        if k == 0:
            continue
        for qi, e in enumerate(eta):
            ph = phase_grid(P2, float(k), e**2)
            inner = 0.0
            for pi, tau in enumerate(g.tau_axis()):
                sig = tau - ph
                bs = math.sqrt(1 + sig**2)
                wt = (1 + bs / (1 + k**2) ** ((P2.alpha + 1) / 2)) ** 0.25
                inner += (
                    (1 + k**2) ** 0.15 * (1 + e**2) ** 0.05 / bs * wt
                    * abs(F.coeffs[pi, ki, qi])
                )
            acc += (g.dtau * inner) ** 2
    y_manual = (2 * math.pi) ** 1.5 * math.sqrt(g.deta * acc)
    assert y == pytest.approx(y_manual, rel=1e-10)


def test_mixed_norm_properties():
    g = small_grid()
    F = st_random_field(g, BandSpec(1, 6, 1.5), seed=8)
    assert mixed_norm(F, 2, 2, 2) == pytest.approx(F.l2_norm(), rel=1e-10)

    gc = np.zeros(g.st_shape, complex)
    gc[3, 2, 5] = 0.7
    single = SpaceTimeField(g, gc)
    vals = [mixed_norm(single, r, 2, 2) for r in (1.0, 1.3, 2.0)]
    assert max(vals) - min(vals) < 1e-12 * vals[0]

    # two-mode field: l^{r'} norms are nonincreasing in r' (r'=inf vs r'=2)
    gc2 = np.zeros(g.st_shape, complex)
    gc2[3, 1, 2] = 1.0
    gc2[4, 2, 5] = 0.5
    two = SpaceTimeField(g, gc2)
    assert mixed_norm(two, 1, 2, 2) <= mixed_norm(two, 2, 2, 2)

    with pytest.raises(ExponentRangeError):
        mixed_norm(F, 3.0, 2, 2)
    with pytest.raises(ExponentRangeError):
        mixed_norm(F, 2.0, 0.5, 2)
    assert mixed_norm(F, 2, math.inf, math.inf) > 0


def test_norm_homogeneity_and_triangle():
    g = small_grid()
    params = P2
    specs = [
        NormSpec(flavor="x", s1=0.3, s2=0.1, b=0.4),
        NormSpec(flavor="xweighted", s1=0.3, s2=0.1, b=-0.5, beta=0.3),
        NormSpec(flavor="y", s1=0.2, beta=0.2),
        NormSpec(flavor="z", s1=0.1, beta=0.2),
        NormSpec(flavor="mixed", mixedR=1.5, mixedP=2.0, mixedQ=4.0),
    ]
    for seed in range(3):
        a = st_random_field(g, BandSpec(1, 6, 1.5), seed=(10, seed))
        b = st_random_field(g, BandSpec(1, 6, 1.5), seed=(11, seed))
        ab = SpaceTimeField(g, a.coeffs + b.coeffs)
        for spec in specs:
            na = field_norm(a, spec, params)
            nb = field_norm(b, spec, params)
            nsum = field_norm(ab, spec, params)
            scaled = field_norm(SpaceTimeField(g, -2.5 * a.coeffs), spec, params)
            assert scaled == pytest.approx(2.5 * na, rel=1e-10)
            assert nsum <= na + nb + 1e-10 * (na + nb)


def test_mean_zero_projection_never_increases_norms():
    g = small_grid()
    c = np.array(st_random_field(g, BandSpec(1, 6, 1.5), seed=12).coeffs)
    c[:, 0, :] = 0.3 + 0.1j  # inject k = 0 content
    F = SpaceTimeField(g, c)
    Fz = project_mean_zero(F)
    specs = [
        NormSpec(flavor="x", s1=0.3, b=0.4),
        NormSpec(flavor="y", s1=0.2, beta=0.2),
        NormSpec(flavor="z", beta=0.1),
        NormSpec(flavor="mixed", mixedR=1.5, mixedP=2.0, mixedQ=2.0),
    ]
    for spec in specs:
        assert field_norm(Fz, spec, P2) <= field_norm(F, spec, P2) + 1e-12


def _gauss_profile(eta, width=0.6, cut=3.0):
    out = np.exp(-((eta / width) ** 2))
    out[np.abs(eta) > cut] = 0.0
    return out


def test_grid_refinement_stability():
    # same continuum field sampled on a grid and its joint (yPoints, yLength)
    # doubling; the profile's tail is below double precision at the cut
    def build(g):
        c = np.zeros(g.spatial_shape, complex)
        prof = _gauss_profile(g.eta_axis())
        prof[g.yPoints // 2] = 0
        ka = g.k_axis()
        for k, amp in [(1, 1.0), (2, 0.5), (3, 0.25)]:
            c[ka == k] = amp * prof
            c[ka == -k] = amp * prof
        return SpectralField(g, c)

    g1 = make_grid(8, 64, 16 * math.pi)
    g2 = make_grid(8, 128, 32 * math.pi)
    for s1, s2 in [(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]:
        n1 = sobolev_norm(build(g1), s1, s2)
        n2 = sobolev_norm(build(g2), s1, s2)
        assert abs(n2 - n1) / n1 < 1e-8


def test_random_field_contract():
    g = small_grid()
    band = BandSpec(3, 6, 1.0)
    f1 = random_field(g, band, seed=42)
    f2 = random_field(g, band, seed=42)
    assert np.array_equal(f1.coeffs, f2.coeffs)

    absk = np.abs(g.k_axis())
    outside = (absk < 3) | (absk > 6)
    assert np.all(f1.coeffs[outside] == 0)
    abseta = np.abs(g.eta_axis())
    assert np.all(f1.coeffs[:, abseta > 1.0] == 0)

    u = to_physical(f1)
    assert np.max(np.abs(u.imag)) < 1e-12

    with pytest.raises(BandExceedsGridError):
        random_field(g, BandSpec(1, 20, 1.0), seed=0)
    with pytest.raises(BandExceedsGridError):
        random_field(g, BandSpec(1, 4, 100.0), seed=0)


def test_dealiased_product_matches_direct_convolution():
    g = small_grid()
    band = BandSpec(1, g.kMax // 3, 0.9)
    fa = random_field(g, band, seed=1)
    fb = random_field(g, band, seed=2)
    qp = quadratic_product(fa, fb, dealias=2.0 / 3.0)

    # O(n^2) direct convolution of the continuum coefficient densities
    ka = list(g.k_axis())
    eta = g.eta_axis()
    ny = g.yPoints
    direct = np.zeros(g.spatial_shape, complex)
    for i1, k1 in enumerate(ka):
        if not np.any(fa.coeffs[i1]):
            continue
        for i2, k2 in enumerate(ka):
            if not np.any(fb.coeffs[i2]):
                continue
            ko = k1 + k2
            if abs(ko) > g.kMax:
                continue
            io = ka.index(ko)
            for q1 in range(ny):
                if fa.coeffs[i1, q1] == 0:
                    continue
                for q2 in range(ny):
                    if fb.coeffs[i2, q2] == 0:
                        continue
                    qo = (round(eta[q1] / g.deta) + round(eta[q2] / g.deta)) % ny
                    direct[io, qo] += fa.coeffs[i1, q1] * fb.coeffs[i2, q2] * g.deta
    assert np.max(np.abs(qp.coeffs - direct)) < 1e-12


def test_product_exact_grid_doubles_bands():
    g = small_grid()
    fa = random_field(g, BandSpec(1, 8, 1.9), seed=3)
    fb = random_field(g, BandSpec(1, 8, 1.9), seed=4)
    pe = product_exact(fa, fb)
    assert pe.grid.kMax == 2 * g.kMax
    assert pe.grid.deta == pytest.approx(g.deta)
    # collocation values agree: compare u*v sampled via the doubled grid
    ua = to_physical(fa)
    ub = to_physical(fb)
    coarse = to_spectral(ua * ub, g)  # aliased version differs
    assert pe.coeffs.shape == pe.grid.spatial_shape
    assert coarse.coeffs.shape == g.spatial_shape


def test_serialization_round_trip(tmp_path):
    g = small_grid()
    f = random_field(g, BandSpec(1, 6, 1.5), seed=13)
    path = tmp_path / "field.bin"
    save_field(path, f)
    back = load_field(path)
    assert isinstance(back, SpectralField)
    assert back.grid == g
    assert np.array_equal(back.coeffs, f.coeffs)

    F = st_random_field(g, BandSpec(1, 6, 1.5), seed=14)
    path2 = tmp_path / "st.bin"
    save_field(path2, F)
    back2 = load_field(path2)
    assert isinstance(back2, SpaceTimeField)
    assert np.array_equal(back2.coeffs, F.coeffs)


def test_csv_export_small_grid():
    g = make_grid(2, 8, 4 * math.pi, tPoints=8, tWindow=1.0)
    c = np.zeros(g.spatial_shape, complex)
    c[1, 2] = 1.5 - 0.25j
    f = SpectralField(g, c)
    buf = io.StringIO()
    field_to_csv(f, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "k,eta1,re,im"
    assert len(lines) == 1 + c.size
    hit = [ln for ln in lines[1:] if ln.startswith("1,") and "1.5" in ln]
    assert hit and "-0.25" in hit[0]


def test_fields_are_immutable():
    g = small_grid()
    f = random_field(g, BandSpec(1, 5, 1.0), seed=15)
    with pytest.raises(ValueError):
        f.coeffs[1, 2] = 99.0
