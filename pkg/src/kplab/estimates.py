"""Ratio-sweep harnesses for the bilinear space-time estimates.

Every experiment has the same falsification-resistant shape: an estimate
LHS <= C * RHS with a non-constructive constant is probed by computing the
ratio LHS/RHS over ensembles of band-limited data at dyadic frequency scales
N, and fitting the log-log slope of the per-N worst case.  A bounded estimate
shows a flat-or-decaying envelope; the known failure regimes show growth at
their predicted exponents.

Ensembles mix seeded random band data with directional generators that
realize the binding interaction geometries (two comparable high bands, two
opposite high bands producing low output, and a low-high pair).  The
'comparable' generator concentrates on a single x-frequency pair +-N with
transverse width proportional to sqrt(N), the geometry that saturates the
cutoff product estimate, so the two-sided slope windows are meaningful.

The failure-of-global-estimate experiment evaluates the explicit closed form
of the squared free flow for characteristic-function data.  Its exact
space-time L2 integral diverges logarithmically at the fold omega -> 0, so
both quadrature routes share a smooth lower taper at a fixed fraction of the
interval half-width; the taper scales with the support, which preserves the
N^(1/2) |I|^(1/2) law exactly and keeps the two routes comparable.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import fields
from .errors import (
    BandExceedsGridError,
    InsufficientSpanError,
    InvalidSpecError,
    NonpositiveValueError,
    ZeroDenominatorError,
)
from .evolution import raised_cosine_window
from .fields import (
    BandSpec,
    NormSpec,
    SpaceTimeField,
    SpectralField,
    bourgain_norm,
    make_grid,
    random_field,
    sobolev_norm,
    st_product_exact,
    st_random_field,
)


@dataclass(frozen=True)
class RatioSample:
    N: int
    value: float
    meta: tuple = ()


@dataclass(frozen=True)
class ScalingFit:
    samples: tuple
    exponent: float
    residual: float
    intercept: float


def fit_exponent(samples, min_span=8.0):
    """Least squares on (log N, log value); returns slope and RMS residual."""
    pts = [
        (s.N, s.value) if isinstance(s, RatioSample) else (s[0], s[1]) for s in samples
    ]
    if len(pts) < 2:
        raise InsufficientSpanError(f"need at least 2 samples, got {len(pts)}")
    ns = np.array([p[0] for p in pts], dtype=float)
    vals = np.array([p[1] for p in pts], dtype=float)
    if ns.max() < min_span * ns.min():
        raise InsufficientSpanError(
            f"N span {ns.min():g}..{ns.max():g} is below the required {min_span}x"
        )
    if not np.all(vals > 0):
        raise NonpositiveValueError("all sample values must be positive for a log fit")
    x, y = np.log(ns), np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return ScalingFit(
        samples=tuple(RatioSample(int(n), float(v)) for n, v in pts),
        exponent=float(slope),
        residual=resid,
        intercept=float(intercept),
    )


# ---------------------------------------------------------------------------
# bilinear Strichartz ratios (free flows, physical-space time quadrature)


def _product_l2_lhs(u0, v0, weights, params):
    g = u0.grid
    g2 = replace(g, kMax=2 * g.kMax, yPoints=2 * g.yPoints)
    a = fields._embed(u0.coeffs * fields._y_sign_array(g), g2.spatial_shape)
    b = fields._embed(v0.coeffs * fields._y_sign_array(g), g2.spatial_shape)
    scale = g2.nx * g2.yPoints**g2.yDims * g2.deta**g2.yDims
    phi = fields.phi_grid(g2, params)
    dx = 2.0 * math.pi / g2.nx
    cell = dx * g2.dy**g2.yDims
    t_axis = g.t_axis()
    total = 0.0
    for w, t in zip(weights, t_axis):
        if w == 0.0:
            continue
        mult = np.exp(1j * t * phi)
        ua = np.fft.ifftn(a * mult) * scale
        ub = np.fft.ifftn(b * mult) * scale
        total += w * w * cell * float(np.sum(np.abs(ua * ub) ** 2))
    return math.sqrt(g.dt * total)


def strichartz2d_ratio(u0, v0, s1, s2, cutoff, params):
    """Cutoff bilinear ratio ||psi (e^{itphi}u0)(e^{itphi}v0)|| / (H^s1 x H^s2).

    The product is formed in collocation space on the doubled spatial grid
    (exact, no aliasing) and integrated over the grid's time window; the
    cutoff must vanish at the window edge.
    """
    if u0.grid != v0.grid:
        raise InvalidSpecError(["u0 and v0 must share a grid"])
    if u0.grid.yDims != 1:
        raise InvalidSpecError(["the cutoff estimate lives on T x R (yDims = 1)"])
    if s1 < 0 or s2 < 0:
        raise InvalidSpecError([f"s1, s2 must be >= 0, got {s1}, {s2}"])
    denom = sobolev_norm(u0, s1, 0.0) * sobolev_norm(v0, s2, 0.0)
    if denom == 0.0:
        raise ZeroDenominatorError("zero data: the ratio is undefined")
    g = u0.grid
    if cutoff.support_halfwidth > g.tWindow * (1.0 + 1e-12):
        from .errors import WindowTooSmallError

        raise WindowTooSmallError(
            f"cutoff support {cutoff.support_halfwidth} exceeds tWindow {g.tWindow}"
        )
    w = cutoff.values(g.t_axis())
    return _product_l2_lhs(u0, v0, w, params) / denom


def strichartz3d_ratio(u0, v0, s1, s2, params):
    """Global-in-time bilinear ratio on T x R^2 (wide tapered window surrogate)."""
    if u0.grid != v0.grid:
        raise InvalidSpecError(["u0 and v0 must share a grid"])
    if u0.grid.yDims != 2:
        raise InvalidSpecError(["the global estimate experiment needs yDims = 2"])
    denom = sobolev_norm(u0, s1, 0.0) * sobolev_norm(v0, s2, 0.0)
    if denom == 0.0:
        raise ZeroDenominatorError("zero data: the ratio is undefined")
    w = raised_cosine_window(u0.grid)
    return _product_l2_lhs(u0, v0, w, params) / denom


# ---------------------------------------------------------------------------
# adversarial data generators


def adversarial_pair(kind, N, grid, params, seed, eta_width=2.0):
    """Band-limited pairs realizing the named frequency-interaction geometry.

    comparable:        both factors at x-frequencies +-[N, N+2], transverse
                       width 0.35 sqrt(N) (the parabolic packet family);
                       returns the same field twice.
    high-high-to-low:  one-sided complex factors on [N, 2N] and [-2N, -N], so
                       the product's x-support is [-N, N].
    low-high:          a low band [1, max(2, N/8)] against [N, 2N].
    """
    eta_nyq = grid.deta * grid.yPoints / 2
    if kind == "comparable":
        if N + 2 > grid.kMax:
            raise BandExceedsGridError(f"comparable band [N, N+2] needs kMax >= {N + 2}")
        width = min(0.35 * math.sqrt(N), 0.45 * eta_nyq)
        rng = np.random.default_rng(np.random.SeedSequence((seed, N, 5)))
        c = np.zeros(grid.spatial_shape, dtype=complex)
        eta = grid.eta_axis()
        band = np.abs(eta) <= width
        kaxis = grid.k_axis()
        for k in range(N, N + 3):
            col = np.where(kaxis == k)[0][0]
            amp = 1.0 + 0.05 * rng.standard_normal(int(band.sum()))
            c[col, band] = amp
        c = (c + fields._conj_mirror(c)) / 2.0
        c[0] = 0.0
        fields._zero_nyquist(c, grid)
        u = SpectralField(grid, c)
        return u, u
    if kind == "high-high-to-low":
        if 2 * N > grid.kMax:
            raise BandExceedsGridError(f"band [N, 2N] needs kMax >= {2 * N}")
        band = BandSpec(kLo=N, kHi=2 * N, etaHi=min(eta_width, 0.45 * eta_nyq))
        u = random_field(grid, band, np.random.SeedSequence((seed, N, 1)), real=False, side="+")
        v = random_field(grid, band, np.random.SeedSequence((seed, N, 2)), real=False, side="-")
        return u, v
    if kind == "low-high":
        if 2 * N > grid.kMax:
            raise BandExceedsGridError(f"band [N, 2N] needs kMax >= {2 * N}")
        lo = BandSpec(kLo=1, kHi=max(2, N // 8), etaHi=min(eta_width, 0.45 * eta_nyq))
        hi = BandSpec(kLo=N, kHi=2 * N, etaHi=min(eta_width, 0.45 * eta_nyq))
        u = random_field(grid, lo, np.random.SeedSequence((seed, N, 3)))
        v = random_field(grid, hi, np.random.SeedSequence((seed, N, 4)))
        return u, v
    raise InvalidSpecError([f"unknown adversarial kind {kind!r}"])


# ---------------------------------------------------------------------------
# failure of the global estimate (characteristic-interval data)

_FLOOR = (0.02, 0.08)  # smooth taper of omega/|I|: zero below, one above


def _smoothstep(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    f = np.zeros_like(x)
    pos = (x > 0) & (x < 1)
    f[pos] = np.exp(-1.0 / x[pos])
    g = np.zeros_like(x)
    g[pos] = np.exp(-1.0 / (1.0 - x[pos]))
    out = np.where(x >= 1.0, 1.0, 0.0)
    out[pos] = f[pos] / (f[pos] + g[pos])
    return out


def _floor_weight(omega, half_width):
    a, b = _FLOOR
    return _smoothstep((omega / half_width - a) / (b - a))


@dataclass(frozen=True)
class CounterexampleConfig:
    N: int
    halfWidth: float

    def __post_init__(self):
        problems = []
        if self.N < 8:
            problems.append(f"N must be >= 8, got {self.N}")
        if not self.halfWidth > 0:
            problems.append(f"halfWidth must be positive, got {self.halfWidth}")
        if problems:
            raise InvalidSpecError(problems)


def counterexample_lhs(cfg, params, quad_points=96, route="omega"):
    """L2 norm of the squared-free-flow transform for interval data at k = 2N.

    The integrand is (N/2)^2 omega^-2 chi(eta/2+omega) chi(eta/2-omega) over
    the region omega^2 = N phi0(N) - N tau/2 - eta^2/4 > 0, with the smooth
    support-proportional taper regularizing the integrable-only-after-taper
    fold at omega = 0.

    route='omega' integrates in the (eta, omega) variables (the reference
    route, where d tau = (4 omega / N) d omega collapses the weight to
    omega^-1); route='tau' integrates in the (eta, tau) variables directly,
    parameterized about the fold to avoid N^(alpha+1)-scale cancellation.
    Both use nested Gauss-Legendre panels and converge to the same value.
    """
    if quad_points < 16:
        warnings.warn(
            "counterexample quadrature with < 16 nodes per axis; "
            "support is degenerate at this resolution",
            stacklevel=2,
        )
    half = cfg.halfWidth
    n = float(cfg.N)
    nodes, wts = np.polynomial.legendre.leggauss(quad_points)

    # eta in [0, 2I] (even integrand), omega_max(eta) = I - eta/2
    eta = half * (nodes + 1.0)
    eta_w = half * wts
    omega_max = half - eta / 2.0

    a_floor = _FLOOR[0] * half
    if route == "omega":
        lo = np.minimum(a_floor, omega_max)
        mid = 0.5 * (omega_max[:, None] + lo[:, None]) + 0.5 * (
            omega_max[:, None] - lo[:, None]
        ) * nodes[None, :]
        wq = 0.5 * (omega_max[:, None] - lo[:, None]) * wts[None, :]
        inner = np.sum(_floor_weight(mid, half) / mid * wq, axis=1)
        j = n * 2.0 * float(np.sum(eta_w * inner))
        return math.sqrt(max(j, 0.0))
    if route == "tau":
        # tau = tau_fold(eta) - s, omega^2 = (N/2) s, s in (0, 2 omega_max^2 / N]
        s_max = 2.0 * omega_max**2 / n
        mid = 0.5 * s_max[:, None] * (nodes[None, :] + 1.0)
        wq = 0.5 * s_max[:, None] * wts[None, :]
        om = np.sqrt(n * mid / 2.0)
        inner = np.sum(_floor_weight(om, half) / (n * mid / 2.0) * wq, axis=1)
        j = (n**2 / 4.0) * 2.0 * float(np.sum(eta_w * inner))
        return math.sqrt(max(j, 0.0))
    raise InvalidSpecError([f"unknown quadrature route {route!r}"])


def counterexample_denominator(cfg, s):
    """||D_x^s u0|| ||u0|| for the interval data, constants dropped: 2 N^s |I|."""
    return 2.0 * cfg.N**s * cfg.halfWidth


@dataclass(frozen=True)
class CounterexampleReport:
    fit: ScalingFit
    verdict: str
    predicted_exponent: float
    route_agreement: float


def counterexample_verdict(Ns, s, half_width_exponent, params, quad_points=96):
    """Sweep the ratio lhs / (N^s |I|) with |I| = N^a and fit its growth.

    Predicted exponent is 1/2 - s - a/2; the verdict flags 'estimate fails'
    when the fitted exponent exceeds 0.1.  Also reports the worst two-route
    quadrature disagreement across the sweep.
    """
    if len(Ns) < 3:
        raise InsufficientSpanError(f"need >= 3 sweep points, got {len(Ns)}")
    samples = []
    worst = 0.0
    for n in Ns:
        cfg = CounterexampleConfig(N=int(n), halfWidth=float(n) ** half_width_exponent)
        lhs = counterexample_lhs(cfg, params, quad_points, route="omega")
        alt = counterexample_lhs(cfg, params, quad_points, route="tau")
        if lhs > 0:
            worst = max(worst, abs(alt - lhs) / lhs)
        samples.append(RatioSample(int(n), lhs / counterexample_denominator(cfg, s)))
    fit = fit_exponent(samples)
    predicted = 0.5 - s - 0.5 * half_width_exponent
    verdict = "estimate fails" if fit.exponent > 0.1 else "bounded"
    return CounterexampleReport(fit, verdict, predicted, worst)


# ---------------------------------------------------------------------------
# Bourgain-norm bilinear ratios


def bilinear_ratio(u, v, lhs_spec, rhs_spec, params):
    """||d_x(uv)||_lhs / (||u||_rhs ||v||_rhs) for space-time fields.

    The product is computed by inverse transform to (t, x, y) samples,
    pointwise multiplication, and forward transform, all on the doubled
    lattice so no coefficient of the product is lost or aliased.
    """
    if lhs_spec.flavor not in ("x", "xweighted", "z"):
        raise InvalidSpecError(
            [f"lhs flavor must be x/xweighted/z, got {lhs_spec.flavor!r}"]
        )
    if rhs_spec.flavor not in ("x", "xweighted"):
        raise InvalidSpecError(
            [f"rhs flavor must be x/xweighted, got {rhs_spec.flavor!r}"]
        )
    denom = bourgain_norm(u, rhs_spec, params) * bourgain_norm(v, rhs_spec, params)
    if denom == 0.0:
        raise ZeroDenominatorError("zero data: the bilinear ratio is undefined")
    prod = st_product_exact(u, v)
    g2 = prod.grid
    ik = 1j * g2.k_axis().astype(float).reshape((1, -1) + (1,) * g2.yDims)
    dxprod = SpaceTimeField(g2, ik * prod.coeffs)
    return bourgain_norm(dxprod, lhs_spec, params) / denom


def spacetime_pair(kind, N, grid, params, seed, eta_width=0.9):
    """Space-time ensemble member for the bilinear sweeps.

    random:            independent Hermitian random fields, band [N, 2N].
    comparable:        the parabolic spatial pair times a single tau profile.
    high-high-to-low:  one-sided spatial pair times random tau profiles.
    """
    eta_nyq = grid.deta * grid.yPoints / 2
    if kind == "random":
        band = BandSpec(kLo=N, kHi=2 * N, etaHi=min(eta_width, 0.45 * eta_nyq))
        u = st_random_field(grid, band, np.random.SeedSequence((seed, N, 11)))
        v = st_random_field(grid, band, np.random.SeedSequence((seed, N, 12)))
        return u, v
    if kind in ("comparable", "high-high-to-low"):
        ua, va = adversarial_pair(kind, N, grid, params, seed)
        rng = np.random.default_rng(np.random.SeedSequence((seed, N, 13)))
        nt = grid.tPoints
        if kind == "comparable":
            prof_u = np.zeros(nt, dtype=complex)
            prof_u[0] = 1.0  # concentrate at tau = 0
            prof_v = prof_u
        else:
            prof_u = rng.standard_normal(nt) + 1j * rng.standard_normal(nt)
            prof_v = rng.standard_normal(nt) + 1j * rng.standard_normal(nt)
            prof_u[nt // 2] = 0.0
            prof_v[nt // 2] = 0.0
        shape = (-1,) + (1,) * (1 + grid.yDims)
        u = SpaceTimeField(grid, prof_u.reshape(shape) * ua.coeffs[None, ...])
        v = SpaceTimeField(grid, prof_v.reshape(shape) * va.coeffs[None, ...])
        return u, v
    raise InvalidSpecError([f"unknown space-time ensemble kind {kind!r}"])


# ---------------------------------------------------------------------------
# sweep drivers (shared by the CLI and the acceptance suite)

STRICHARTZ2D_KINDS = ("random", "comparable", "high-high-to-low", "low-high")
BILINEAR_KINDS = ("random", "comparable", "high-high-to-low")


def strichartz2d_grid(N, yPoints=256, yLength=32 * math.pi, tPoints=64, tWindow=2.0):
    return make_grid(2 * N + 2, yPoints, yLength, 1, tPoints, tWindow)


def strichartz3d_grid(N, yPoints=32, yLength=16 * math.pi, tPoints=64, tWindow=4.0):
    return make_grid(2 * N + 2, yPoints, yLength, 2, tPoints, tWindow)


def bilinear_grid(N, yPoints=64, yLength=32 * math.pi, tPoints=32, tWindow=2.0):
    return make_grid(2 * N + 2, yPoints, yLength, 1, tPoints, tWindow)


def strichartz2d_point(point):
    """One (N, kind, seed) ratio sample; `point` is a plain dict (picklable)."""
    from .evolution import CutoffSpec
    from .symbols import DispersionParams

    params = DispersionParams(point["alpha"], 1)
    grid = strichartz2d_grid(point["N"])
    cutoff = CutoffSpec(T=1.0)
    kind, seed, n = point["kind"], point["seed"], point["N"]
    if kind == "random":
        eta_nyq = grid.deta * grid.yPoints / 2
        band = BandSpec(kLo=n, kHi=2 * n, etaHi=min(2.0, 0.45 * eta_nyq))
        u = random_field(grid, band, np.random.SeedSequence((seed, n, 21)))
        v = random_field(grid, band, np.random.SeedSequence((seed, n, 22)))
    else:
        u, v = adversarial_pair(kind, n, grid, params, seed)
    value = strichartz2d_ratio(u, v, point["s1"], point["s2"], cutoff, params)
    return {
        "N": n,
        "kind": kind,
        "seed": seed,
        "value": value,
        "s1": point["s1"],
        "s2": point["s2"],
        "alpha": point["alpha"],
    }


def strichartz3d_point(point):
    from .symbols import DispersionParams

    params = DispersionParams(point["alpha"], 2)
    grid = strichartz3d_grid(point["N"])
    n, seed = point["N"], point["seed"]
    eta_nyq = grid.deta * grid.yPoints / 2
    band = BandSpec(kLo=n, kHi=2 * n, etaHi=min(0.8, 0.4 * eta_nyq))
    u = random_field(grid, band, np.random.SeedSequence((seed, n, 31)))
    v = random_field(grid, band, np.random.SeedSequence((seed, n, 32)))
    value = strichartz3d_ratio(u, v, point["s1"], point["s2"], params)
    return {
        "N": n,
        "kind": "random",
        "seed": seed,
        "value": value,
        "s1": point["s1"],
        "s2": point["s2"],
        "alpha": point["alpha"],
    }


def bilinear_point(point):
    from .symbols import DispersionParams

    params = DispersionParams(point["alpha"], 1)
    grid = bilinear_grid(point["N"])
    u, v = spacetime_pair(point["kind"], point["N"], grid, params, point["seed"])
    lhs = NormSpec(
        flavor=point.get("lhsFlavor", "xweighted"),
        s1=point["s1"],
        s2=point["s2"],
        b=point["bPrime"],
        beta=point["beta"],
    )
    rhs = NormSpec(
        flavor=point.get("rhsFlavor", "xweighted"),
        s1=point["s1"],
        s2=point["s2"],
        b=point["b"],
        beta=point["beta"],
    )
    value = bilinear_ratio(u, v, lhs, rhs, params)
    return {
        "N": point["N"],
        "kind": point["kind"],
        "seed": point["seed"],
        "value": value,
        "alpha": point["alpha"],
        "s1": point["s1"],
        "b": point["b"],
        "bPrime": point["bPrime"],
        "beta": point["beta"],
    }


def envelope_fit(rows):
    """Fit the per-N maximum ratio (the empirical operator norm) over a sweep."""
    best = {}
    for row in rows:
        n, v = int(row["N"]), float(row["value"])
        if n not in best or v > best[n]:
            best[n] = v
    samples = [RatioSample(n, best[n]) for n in sorted(best)]
    return fit_exponent(samples)
