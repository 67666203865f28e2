"""Free flow, cutoff blocks, nonlinearity, and the two solvers."""

import math

import numpy as np
import pytest

from kplab.errors import InvalidSpecError, SolverDivergenceError, WindowTooSmallError
from kplab.evolution import (
    CutoffSpec,
    SolveConfig,
    bump,
    evolve_nonlinear,
    free_block,
    free_evolve,
    nonlinearity,
    observed_order,
    picard_solve,
)
from kplab.fields import (
    BandSpec,
    SpectralField,
    make_grid,
    random_field,
    st_to_physical,
    to_physical,
)
from kplab.symbols import DispersionParams, phase_grid

P2 = DispersionParams(2.0, 1)


def test_bump_shape():
    t = np.linspace(-3, 3, 1201)
    v = bump(t)
    assert np.all((0.0 <= v) & (v <= 1.0))
    assert np.all(v[np.abs(t) <= 1.0] == 1.0)
    assert np.all(v[np.abs(t) >= 2.0] == 0.0)
    assert 0.0 < bump(1.5) < 1.0
    spec = CutoffSpec(T=0.25)
    assert spec.values(0.2) == 1.0
    assert spec.values(0.6) == 0.0


def small_smooth(grid, amplitude=0.01, eta_width=1.0, modes=((1, 1.0),)):
    c = np.zeros(grid.spatial_shape, complex)
    eta = grid.eta_axis()
    prof = np.zeros_like(eta)
    m = np.abs(eta) < eta_width
    prof[m] = np.exp(1.0 - 1.0 / (1.0 - (eta[m] / eta_width) ** 2))
    prof[grid.yPoints // 2] = 0.0
    ka = grid.k_axis()
    for k, amp in modes:
        c[ka == k] += 0.5 * amplitude * amp * prof / grid.deta / (2 * math.pi)
        c[ka == -k] += 0.5 * amplitude * amp * prof / grid.deta / (2 * math.pi)
    return SpectralField(grid, c)


def test_free_evolve_identity_unitarity_group_law():
    g = make_grid(8, 32, 16 * math.pi)
    f = random_field(g, BandSpec(1, 6, 1.5), seed=1)
    assert np.array_equal(free_evolve(f, 0.0, P2).coeffs, f.coeffs)
    for t in (0.3, -1.7, 12.0):
        assert free_evolve(f, t, P2).l2_norm() == pytest.approx(
            f.l2_norm(), rel=1e-12
        )
    a = free_evolve(free_evolve(f, 0.4, P2), 0.35, P2)
    b = free_evolve(f, 0.75, P2)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-12 * np.max(np.abs(f.coeffs))


def block_grid():
    # tau range must cover the dispersion surface: kMax=3 keeps |phi| <= 31
    return make_grid(3, 16, 8 * math.pi, tPoints=256, tWindow=2.0)


def test_free_block_single_mode_against_direct_summation():
    g = block_grid()
    c = np.zeros(g.spatial_shape, complex)
    c[2, 3] = 1.0
    f = SpectralField(g, c)
    F = free_block(f, CutoffSpec(T=1.0), P2)

    phi = float(phase_grid(P2, 2.0, (3 * g.deta) ** 2))
    tl = g.t_axis()
    psi = bump(tl)
    for p_idx in (0, 5, 100, 200):
        tau = g.tau_axis()[p_idx]
        direct = np.sum(psi * np.exp(1j * tl * (phi - tau))) / (g.tPoints * g.dtau)
        assert F.coeffs[p_idx, 2, 3] == pytest.approx(direct, abs=1e-13)
    # energy concentrates at tau near phi
    peak = g.tau_axis()[np.argmax(np.abs(F.coeffs[:, 2, 3]))]
    assert abs(peak - phi) <= 2 * g.dtau


def test_free_block_l2_factorizes():
    g = block_grid()
    f = random_field(g, BandSpec(1, 3, 1.0), seed=2)
    F = free_block(f, CutoffSpec(T=1.0), P2)
    psi_l2 = math.sqrt(g.dt * np.sum(bump(g.t_axis()) ** 2))
    assert F.l2_norm() == pytest.approx(psi_l2 * f.l2_norm(), rel=1e-8)


def test_free_block_samples_match_windowed_flow():
    g = block_grid()
    f = random_field(g, BandSpec(1, 3, 1.0), seed=3)
    F = free_block(f, None, P2)  # raised-cosine surrogate window
    samples = st_to_physical(F)
    from kplab.evolution import raised_cosine_window

    w = raised_cosine_window(g)
    for n in (0, 64, 128, 200):
        expect = w[n] * to_physical(free_evolve(f, g.t_axis()[n], P2))
        assert np.max(np.abs(samples[n] - expect)) < 1e-10


def test_free_block_window_too_small():
    g = make_grid(3, 16, 8 * math.pi, tPoints=64, tWindow=1.0)
    f = random_field(g, BandSpec(1, 3, 1.0), seed=4)
    with pytest.raises(WindowTooSmallError):
        free_block(f, CutoffSpec(T=1.0), P2)  # support (-2, 2) vs window 1


def test_nonlinearity_cosine():
    g = make_grid(8, 32, 16 * math.pi)
    c = np.zeros(g.spatial_shape, complex)
    c[1, 0] = 0.5 / g.deta
    c[-1, 0] = 0.5 / g.deta
    f = SpectralField(g, c)  # u = cos(x)
    nl = nonlinearity(f)
    nz = np.argwhere(np.abs(nl.coeffs) > 1e-13)
    assert {int(g.k_axis()[i]) for i, _ in nz} == {2, -2}
    # -(1/2) d_x(u^2) = sin(2x)/2: density amplitudes -+ i/4
    assert nl.coeffs[2, 0] * g.deta == pytest.approx(-0.25j, abs=1e-13)
    assert nl.coeffs[-2, 0] * g.deta == pytest.approx(0.25j, abs=1e-13)


def test_nonlinearity_zero_and_skew_symmetry():
    g = make_grid(8, 32, 16 * math.pi)
    z = SpectralField(g, np.zeros(g.spatial_shape, complex))
    assert np.all(nonlinearity(z).coeffs == 0)

    u = random_field(g, BandSpec(1, 8, 1.9), seed=5)
    nu = nonlinearity(u)
    pairing = g.xy_measure * np.sum(np.conj(u.coeffs) * nu.coeffs)
    assert abs(pairing) < 1e-10 * u.l2_norm() ** 2


def test_solve_config_validation():
    with pytest.raises(InvalidSpecError):
        SolveConfig(dt=0.2, T=0.1)
    with pytest.raises(InvalidSpecError):
        SolveConfig(dt=0.01, T=0.1, dealias=0.0)


def test_evolve_zero_data():
    g = make_grid(8, 32, 16 * math.pi)
    z = SpectralField(g, np.zeros(g.spatial_shape, complex))
    traj = evolve_nonlinear(z, SolveConfig(dt=0.01, T=0.05), P2)
    assert all(np.all(s.coeffs == 0) for s in traj.snapshots)


def test_evolve_linear_limit_matches_free_flow():
    g = make_grid(8, 32, 16 * math.pi)
    f = random_field(g, BandSpec(1, 6, 1.5), seed=6)
    traj = evolve_nonlinear(
        f, SolveConfig(dt=0.01, T=0.05), P2, save_every=1, linear_only=True
    )
    for t, snap in zip(traj.times, traj.snapshots):
        expect = free_evolve(f, t, P2)
        assert np.max(np.abs(snap.coeffs - expect.coeffs)) < 1e-12


def test_evolve_conservation_quick():
    g = make_grid(16, 64, 16 * math.pi)
    f = small_smooth(g)
    traj = evolve_nonlinear(f, SolveConfig(dt=1e-3, T=0.1), P2)
    assert max(traj.l2_drift) <= 1e-10


def test_evolve_rejects_incommensurable_horizon():
    g = make_grid(8, 32, 16 * math.pi)
    f = small_smooth(g)
    with pytest.raises(InvalidSpecError):
        evolve_nonlinear(f, SolveConfig(dt=3e-3, T=0.01), P2)


def test_evolve_blowup_guard():
    g = make_grid(16, 32, 16 * math.pi)
    f = small_smooth(g, amplitude=30.0, modes=((1, 1.0), (2, 1.0), (3, 1.0)))
    with pytest.raises(SolverDivergenceError):
        evolve_nonlinear(f, SolveConfig(dt=0.25, T=50.0), P2, save_every=1)


def test_observed_order_at_least_3p5():
    g = make_grid(10, 64, 16 * math.pi)
    f = small_smooth(g, amplitude=0.5, modes=((1, 1.0), (2, 0.6)))
    p = observed_order(f, P2, T=0.08, dt=4e-3)
    assert p >= 3.5


def picard_grid():
    return make_grid(10, 64, 16 * math.pi, tPoints=128, tWindow=0.2)


def test_picard_first_iterate_is_free_solution():
    g = picard_grid()
    f = small_smooth(g)
    res = picard_solve(f, CutoffSpec(T=0.05), 1, P2)
    tl = g.t_axis()
    for i in np.where(np.abs(tl) <= 0.05 + 1e-12)[0]:
        expect = free_evolve(f, tl[i], P2)
        assert np.max(np.abs(res.coeffs[i] - expect.coeffs)) < 1e-10


def test_picard_zero_data():
    g = picard_grid()
    z = SpectralField(g, np.zeros(g.spatial_shape, complex))
    res = picard_solve(z, CutoffSpec(T=0.05), 3, P2)
    assert np.all(res.coeffs == 0)
    assert all(d == 0 for d in res.diff_norms)


def test_picard_contracts_and_matches_exponential_stepper():
    g = picard_grid()
    f = small_smooth(g)
    res = picard_solve(f, CutoffSpec(T=0.05), 8, P2)
    diffs = res.diff_norms
    assert all(
        diffs[i + 1] < diffs[i] for i in range(len(diffs) - 1) if diffs[i] > 0
    )
    traj = evolve_nonlinear(f, SolveConfig(dt=6.25e-4, T=0.05), P2, save_every=10**9)
    pic = res.at_time(0.05)
    diff = math.sqrt(
        g.xy_measure * np.sum(np.abs(pic.coeffs - traj.final.coeffs) ** 2)
    )
    assert diff / traj.final.l2_norm() < 1e-6


def test_picard_window_check():
    g = picard_grid()
    f = small_smooth(g)
    with pytest.raises(WindowTooSmallError):
        picard_solve(f, CutoffSpec(T=0.2), 2, P2)  # support 0.4 > window 0.2
