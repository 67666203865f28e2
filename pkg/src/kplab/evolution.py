"""Free propagator, time-localized blocks, and the two nonlinear solvers.

The linear flow is the unitary multiplier exp(i t phi(k, eta)) acting on
spectral coefficients.  The quadratic term is written in divergence form,
-(1/2) d_x(u^2), evaluated pseudospectrally with zero-padding, which keeps the
semi-discrete system exactly L2-conservative; the only drift comes from time
integration.

Two independent integrators solve the same truncated system:

* an exponential Runge-Kutta stepper (fourth order, exact on the linear part,
  coefficients built from the phi1/phi2/phi3 family), and
* Picard iteration of the time-localized integral equation, with a smooth
  cutoff of scale T and composite-Simpson prefix quadrature on the t lattice.

Their agreement on small smooth data is the cross-validation oracle used by
the acceptance suite.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from . import fields
from .errors import InvalidSpecError, SolverDivergenceError, WindowTooSmallError
from .fields import SpaceTimeField, SpectralField
from .symbols import phi1, phi2, phi3


def _cumulative_simpson(y, dx, axis):
    # scipy's routine is real-only; run the parts separately
    re = cumulative_simpson(y.real, dx=dx, axis=axis, initial=0.0)
    im = cumulative_simpson(y.imag, dx=dx, axis=axis, initial=0.0)
    return re + 1j * im


def bump(t):
    """C-infinity cutoff: 1 on |t|<=1, exp(1 - 1/(1-(|t|-1)^2)) on 1<|t|<2, else 0."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    out = np.zeros_like(a)
    out[a <= 1.0] = 1.0
    mid = (a > 1.0) & (a < 2.0)
    s = a[mid] - 1.0
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - s * s))
    if np.ndim(t) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class CutoffSpec:
    """Rescaled smooth cutoff psi_T(t) = psi(t/T): 1 on |t|<=T, support (-2T, 2T)."""

    T: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidSpecError([f"cutoff scale T must be positive, got {self.T}"])

    def values(self, t):
        return bump(np.asarray(t, dtype=float) / self.T)

    @property
    def support_halfwidth(self):
        return 2.0 * self.T


def raised_cosine_window(grid, taper_frac=0.1):
    """Window equal to 1 inside, cosine-tapered over the outer taper_frac per side."""
    t = grid.t_axis()
    u = np.abs(t) / grid.tWindow
    w = np.ones_like(u)
    edge = 1.0 - taper_frac
    m = u > edge
    w[m] = 0.5 * (1.0 + np.cos(math.pi * (u[m] - edge) / taper_frac))
    return w


def free_evolve(f, t, params):
    """Apply the unitary group exp(i t phi(D)); preserves every |coefficient|."""
    phi = fields.phi_grid(f.grid, params)
    return SpectralField(f.grid, f.coeffs * np.exp(1j * t * phi))


def free_block(f, cutoff, params):
    """Sample the cutoff free flow on the t lattice and transform to (tau, k, eta).

    cutoff=None uses a raised-cosine window over the outer 10% of the time
    window as a documented surrogate for 'no cutoff'.  The grid's tau range
    must contain the data's dispersion surface for the block to be meaningful;
    this is the caller's responsibility (keep max |phi| well under pi/dt).
    """
    g = f.grid
    if cutoff is None:
        w = raised_cosine_window(g)
    else:
        if cutoff.support_halfwidth > g.tWindow * (1.0 + 1e-12):
            raise WindowTooSmallError(
                f"cutoff support halfwidth {cutoff.support_halfwidth} exceeds "
                f"tWindow {g.tWindow}"
            )
        w = cutoff.values(g.t_axis())
    phi = fields.phi_grid(g, params)
    t = g.t_axis().reshape((-1,) + (1,) * (1 + g.yDims))
    samples = w.reshape(t.shape) * np.exp(1j * t * phi[None, ...]) * f.coeffs[None, ...]
    spec = np.fft.fft(samples, axis=0) / (g.tPoints * g.dtau)
    signs = fields._alt_signs(g.tPoints).reshape(t.shape)
    return SpaceTimeField(g, spec * signs)


class _QuadraticTerm:
    """Cached pseudospectral evaluation of -(1/2) d_x(u^2) on one grid."""

    def __init__(self, grid, dealias=2.0 / 3.0):
        self.grid = grid
        self.pad = fields.dealias_grid(grid, dealias)
        self._emb = []
        for n_old, n_new in zip(grid.spatial_shape, self.pad.spatial_shape):
            pos = (n_old + 1) // 2
            self._emb.append(
                np.concatenate(
                    [np.arange(pos), n_new - n_old + np.arange(pos, n_old)]
                )
            )
        self._emb = np.ix_(*self._emb)
        self._ysign_small = fields._y_sign_array(grid)
        self._ysign_big = fields._y_sign_array(self.pad)
        self._fwd_scale = self.pad.nx * self.pad.yPoints**self.pad.yDims
        k = grid.k_axis().reshape((-1,) + (1,) * grid.yDims)
        self._half_ik = -0.5j * k
        self._nyq = grid.yPoints // 2

    def __call__(self, c):
        g, gp = self.grid, self.pad
        big = np.zeros(gp.spatial_shape, dtype=complex)
        big[self._emb] = c * self._ysign_small
        u = np.fft.ifftn(big) * self._fwd_scale  # deta factors cancel in the round trip
        sq = np.fft.fftn(u * u) / self._fwd_scale
        conv = sq[self._emb] * self._ysign_small * g.deta**g.yDims
        out = self._half_ik * conv
        out[0] = 0.0
        for ax in range(g.yDims):
            idx = [slice(None)] * out.ndim
            idx[1 + ax] = self._nyq
            out[tuple(idx)] = 0.0
        return out


def nonlinearity(f, dealias=2.0 / 3.0):
    """-(1/2) d_x(u^2), dealiased and mean-zero projected."""
    op = _QuadraticTerm(f.grid, dealias)
    return SpectralField(f.grid, op(np.asarray(f.coeffs)))


@dataclass(frozen=True)
class SolveConfig:
    dt: float
    T: float
    dealias: float = 2.0 / 3.0
    picardIters: int = 8

    def __post_init__(self):
        problems = []
        if not (0 < self.dt <= self.T):
            problems.append(f"need 0 < dt <= T, got dt={self.dt}, T={self.T}")
        if not (0 < self.dealias <= 1.0):
            problems.append(f"dealias fraction must lie in (0, 1], got {self.dealias}")
        if self.picardIters < 1:
            problems.append(f"picardIters must be >= 1, got {self.picardIters}")
        if problems:
            raise InvalidSpecError(problems)


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: list
    l2_drift: np.ndarray  # relative drift |norm(t)/norm(0) - 1| at each snapshot

    @property
    def final(self):
        return self.snapshots[-1]


def _etdrk4_tables(grid, params, dt):
    phi = fields.phi_grid(grid, params)
    z = 1j * dt * phi
    e_full = np.exp(z)
    e_half = np.exp(0.5 * z)
    q = 0.5 * dt * phi1(0.5 * z)
    p1, p2, p3 = phi1(z), phi2(z), phi3(z)
    f1 = dt * (p1 - 3.0 * p2 + 4.0 * p3)
    f2 = dt * (p2 - 2.0 * p3)
    f3 = dt * (4.0 * p3 - p2)
    return e_full, e_half, q, f1, f2, f3


def evolve_nonlinear(f, cfg, params, save_every=None, linear_only=False):
    """Fourth-order exponential stepper for the full equation.

    The linear flow is applied exactly; the quadratic term uses the cached
    dealiased product.  Aborts with SolverDivergenceError if the L2 norm grows
    tenfold (instability / dt too large).  linear_only=True drops the
    quadratic term, in which case each step is the exact free flow.
    """
    g = f.grid
    n_steps = int(round(cfg.T / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.T) > 1e-9 * max(1.0, cfg.T):
        raise InvalidSpecError(
            [f"T = {cfg.T} is not an integer multiple of dt = {cfg.dt}"]
        )
    if save_every is None:
        save_every = max(1, n_steps // 64)

    e_full, e_half, q, f1, f2, f3 = _etdrk4_tables(g, params, cfg.dt)
    nl = _QuadraticTerm(g, cfg.dealias)

    u = np.array(f.coeffs)
    u[0] = 0.0
    norm0 = math.sqrt(float(np.sum(np.abs(u) ** 2)))
    times = [0.0]
    snaps = [SpectralField(g, u.copy())]
    drift = [0.0]

    for n in range(1, n_steps + 1):
        if linear_only:
            u = e_full * u
        else:
            nu = nl(u)
            a = e_half * u + q * nu
            na = nl(a)
            b = e_half * u + q * na
            nb = nl(b)
            c = e_half * a + q * (2.0 * nb - nu)
            nc = nl(c)
            u = e_full * u + f1 * nu + 2.0 * f2 * (na + nb) + f3 * nc
        if n % save_every == 0 or n == n_steps:
            nrm = math.sqrt(float(np.sum(np.abs(u) ** 2)))
            if norm0 > 0 and nrm > 10.0 * norm0:
                raise SolverDivergenceError(
                    f"L2 norm grew by {nrm / norm0:.2f}x at t = {n * cfg.dt:g}; "
                    "reduce dt"
                )
            times.append(n * cfg.dt)
            snaps.append(SpectralField(g, u.copy()))
            drift.append(abs(nrm / norm0 - 1.0) if norm0 > 0 else 0.0)

    return Trajectory(np.array(times), snaps, np.array(drift))


def observed_order(f, params, T, dt, dealias=2.0 / 3.0):
    """Richardson estimate of the stepper's convergence order on fixed data."""
    finals = []
    for scale in (1, 2, 4):
        cfg = SolveConfig(dt=dt / scale, T=T, dealias=dealias)
        finals.append(evolve_nonlinear(f, cfg, params, save_every=10**9).final)
    e1 = _l2_diff(finals[0], finals[1])
    e2 = _l2_diff(finals[1], finals[2])
    if e2 == 0.0:
        return float("inf")
    return math.log2(e1 / e2)


def _l2_diff(fa, fb):
    return math.sqrt(
        fa.grid.xy_measure * float(np.sum(np.abs(fa.coeffs - fb.coeffs) ** 2))
    )


@dataclass
class PicardResult:
    grid: object
    times: np.ndarray
    coeffs: np.ndarray  # (tPoints, ...) final iterate over the whole lattice
    diff_norms: list  # sup-in-t L2 norm of successive iterate differences

    def snapshot(self, index):
        return SpectralField(self.grid, self.coeffs[index])

    def at_time(self, t):
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9:
            raise InvalidSpecError([f"t = {t} is not on the time lattice"])
        return self.snapshot(idx)


def picard_solve(f, cutoff, iters, params, dealias=2.0 / 3.0):
    """Picard iteration of the time-localized integral equation.

    Iterates u_{n+1}(t) = psi_1(t) e^{it phi(D)} u0
                          - psi_T(t) int_0^t e^{i(t-t') phi(D)}
                                     (psi_T u_n)(psi_T u_n)_x dt'
    on the grid's t lattice, with the prefix integrals evaluated by composite
    Simpson quadrature.  Returns the final iterate over the lattice plus the
    successive-difference norms; aborts if those norms grow three iterations
    in a row.
    """
    g = f.grid
    if iters < 1:
        raise InvalidSpecError([f"iters must be >= 1, got {iters}"])
    if cutoff.support_halfwidth > g.tWindow * (1.0 + 1e-12):
        raise WindowTooSmallError(
            f"cutoff support halfwidth {cutoff.support_halfwidth} exceeds "
            f"tWindow {g.tWindow}"
        )
    t = g.t_axis()
    i_zero = g.tPoints // 2
    assert abs(t[i_zero]) < 1e-12 * g.tWindow

    shape_t = (-1,) + (1,) * (1 + g.yDims)
    phi = fields.phi_grid(g, params)
    e_plus = np.exp(1j * t.reshape(shape_t) * phi[None, ...])
    psi1 = bump(t).reshape(shape_t)
    psiT = cutoff.values(t)
    psiT_sq = (psiT**2).reshape(shape_t)
    psiT_col = psiT.reshape(shape_t)

    c0 = np.array(f.coeffs)
    c0[0] = 0.0
    free = psi1 * e_plus * c0[None, ...]

    nl = _QuadraticTerm(g, dealias)
    cur = np.zeros_like(free)
    diffs = []
    grow = 0
    measure = g.xy_measure

    for _ in range(iters):
        integrand = np.empty_like(free)
        for n in range(g.tPoints):
            integrand[n] = nl(cur[n])
        integrand = np.conj(e_plus) * (psiT_sq * integrand)
        cum = _cumulative_simpson(integrand, dx=g.dt, axis=0)
        prefix = cum - cum[i_zero][None, ...]
        nxt = free + psiT_col * e_plus * prefix

        d = np.sqrt(measure * np.sum(np.abs(nxt - cur) ** 2, axis=tuple(range(1, nxt.ndim))))
        diffs.append(float(d.max()))
        if len(diffs) >= 2 and diffs[-1] > diffs[-2]:
            grow += 1
            if grow >= 3:
                raise SolverDivergenceError(
                    "Picard successive differences grew three iterations in a row; "
                    "shrink T or the data"
                )
        else:
            grow = 0
        cur = nxt

    return PicardResult(g, t, cur, diffs)
