"""Flow-map derivative experiment: the regularity obstruction at low s.

The data family is a pair of x-frequency columns at +-N carrying a transverse
indicator of half-width betaInterval * sqrt(N).  The first three derivatives
of the solution map at zero data are explicit oscillatory sums over the
admissible frequency sets Gamma_1/Gamma_2; for this family only four sign
patterns (k1, k2, k3) in {+-N}^3 survive, and the patterns whose third
frequency opposes the first two make the combined denominator A + B collapse
to the transverse scale while A alone stays at N^(alpha+1).  That mismatch
produces third-derivative growth like t * N^(s - alpha + 9/4) against data
norm N^(s + 1/4), so the normalized ratio R(N) grows at exponent
3/2 - alpha - 2s: positive (C^3 failure) exactly below s = 3/4 - alpha/2.

The triple transverse integral is evaluated on dedicated midpoint lattices
tied to the indicator width (a fiber integral along eta_1 + eta_2 = const
inside an integral over the constant), so indicator edges always fall on cell
boundaries and the quadrature error is second order with no edge straddling.
Unimodular prefactors (the i from the x-derivative, integral signs) are
dropped throughout; only coefficient magnitudes enter the norms.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import fields
from .errors import BandExceedsGridError, InsufficientSpanError, InvalidSpecError
from .estimates import RatioSample, fit_exponent
from .evolution import free_evolve
from .fields import SpectralField
from .symbols import phi0, phi1

SIGN_PATTERNS = ((1, 1, 1), (1, 1, -1), (-1, -1, 1), (-1, -1, -1))


@dataclass(frozen=True)
class IllposedConfig:
    N: int
    betaInterval: float = 0.05
    s: float = 0.0
    t: float = 0.1
    etaQuadPoints: int = 64

    def __post_init__(self):
        problems = []
        if self.N < 8:
            problems.append(f"N must be >= 8, got {self.N}")
        if not (0.0 < self.betaInterval <= 0.1):
            problems.append(
                f"betaInterval must lie in (0, 0.1], got {self.betaInterval}"
            )
        if self.etaQuadPoints < 32 or self.etaQuadPoints % 2:
            problems.append(
                f"etaQuadPoints must be an even integer >= 32, got {self.etaQuadPoints}"
            )
        if problems:
            raise InvalidSpecError(problems)

    @property
    def half_width(self):
        return self.betaInterval * math.sqrt(self.N)


def build_wN(cfg, grid):
    """Indicator data: coefficient 1 at k = +-N for |eta| <= betaInterval sqrt(N)."""
    if grid.yDims != 1:
        raise InvalidSpecError(["the derivative experiment lives on T x R (yDims=1)"])
    if cfg.N > grid.kMax:
        raise BandExceedsGridError(f"N = {cfg.N} exceeds grid kMax = {grid.kMax}")
    w = cfg.half_width
    if w < grid.deta:
        raise BandExceedsGridError(
            f"indicator half-width {w:g} is below the eta spacing {grid.deta:g}"
        )
    if w < 8 * grid.deta:
        warnings.warn(
            f"indicator half-width spans only {w / grid.deta:.1f} eta cells",
            stacklevel=2,
        )
    c = np.zeros(grid.spatial_shape, dtype=complex)
    band = np.abs(grid.eta_axis()) <= w * (1.0 + 1e-12)
    band[grid.yPoints // 2] = False
    kaxis = grid.k_axis()
    c[kaxis == cfg.N] = band.astype(complex)
    c[kaxis == -cfg.N] = band.astype(complex)
    return SpectralField(grid, c)


def wN_norm_exact(cfg, s):
    """Continuum H^s norm of the indicator family: sqrt((2pi)^2 4 W) <N>^s."""
    w = cfg.half_width
    return math.sqrt((2.0 * math.pi) ** 2 * 4.0 * w) * (1.0 + cfg.N**2) ** (s / 2.0)


def first_derivative(w, t, params):
    """d(flow)/d(data) at zero data: exactly the free evolution of w."""
    return free_evolve(w, t, params)


def second_derivative(w, t, params):
    """Second data-derivative of the flow at zero: the pair-interaction sum.

    For each output frequency (k, eta) with k = k1 + k2 over admissible pairs
    of populated columns, accumulates
        (k1 + k2) * i t * phi1(i t A) * e^{i t phi(k, eta)}
        * sum_{eta_1} w(k1, eta_1) w(k2, eta - eta_1) * deta.
    Inputs must be band-limited to half the eta lattice so the convolution
    index never wraps onto populated rows.
    """
    g = w.grid
    if g.yDims != 1:
        raise InvalidSpecError(["second_derivative expects yDims = 1"])
    kaxis = g.k_axis()
    c = w.coeffs
    populated = [int(k) for k in kaxis[np.any(np.abs(c) > 0, axis=1)]]
    eta = g.eta_axis()
    ny = g.yPoints
    out = np.zeros(g.spatial_shape, dtype=complex)
    idx_of_k = {int(k): i for i, k in enumerate(kaxis)}

    qo = np.arange(ny)
    q1 = np.arange(ny)
    shift_idx = (qo[:, None] - q1[None, :]) % ny  # lattice row of eta_out - eta_1

    for k1 in populated:
        for k2 in populated:
            ksum = k1 + k2
            if ksum == 0:
                continue
            if abs(ksum) > g.kMax:
                raise BandExceedsGridError(
                    f"pair ({k1}, {k2}) produces k = {ksum} beyond kMax = {g.kMax}"
                )
            pa = phi0(params, k1) + phi0(params, k2) - phi0(params, ksum)
            e1 = eta[None, :]
            e2 = eta[:, None] - e1
            a = pa - e1**2 / k1 - e2**2 / k2 + (eta**2)[:, None] / ksum
            kern = phi1(1j * t * a)
            c1 = c[idx_of_k[k1]]
            c2 = c[idx_of_k[k2]][shift_idx]
            conv = np.sum(kern * c1[None, :] * c2, axis=1) * g.deta
            out[idx_of_k[ksum]] += ksum * 1j * t * conv

    phi = fields.phi_grid(g, params)
    return SpectralField(g, out * np.exp(1j * t * phi))


@dataclass(frozen=True)
class ThirdDerivativeReport:
    total: float
    restricted: float  # k = +-N contribution only
    per_k: dict


def third_derivative_norm(cfg, params, grid=None, chunk=32):
    """H^s norm of the third data-derivative of the flow for the indicator family.

    Enumerates the four admissible sign patterns, evaluates each transverse
    triple integral as an exact-limit fiber quadrature inside a midpoint sum
    over the fiber constant, assembles the output over k in {+-3N, +-N}, and
    returns total / k = +-N restricted norms plus the per-k breakdown.
    """
    if grid is not None:
        if cfg.N > grid.kMax:
            raise BandExceedsGridError(f"N = {cfg.N} exceeds grid kMax = {grid.kMax}")
    if cfg.etaQuadPoints < 8:
        warnings.warn("fewer than 8 quadrature cells across the indicator", stacklevel=2)
    n = cfg.N
    w = cfg.half_width
    m = cfg.etaQuadPoints
    t = cfg.t
    delta = 2.0 * w / m

    u_nodes = -2.0 * w + (np.arange(2 * m) + 0.5) * delta
    eta_out = -3.0 * w + np.arange(3 * m + 1) * delta

    lo = np.maximum(-w, u_nodes - w)
    hi = np.minimum(w, u_nodes + w)
    frac = (np.arange(m) + 0.5) / m
    eta1 = lo[:, None] + (hi - lo)[:, None] * frac[None, :]  # (2m, m)
    fiber_w = (hi - lo) / m

    per_k = {}
    for s1, s2, s3 in SIGN_PATTERNS:
        k1, k2, k3 = s1 * n, s2 * n, s3 * n
        k12 = k1 + k2
        kout = k12 + k3
        pa = phi0(params, k1) + phi0(params, k2) - phi0(params, k12)
        pb = phi0(params, k3) + phi0(params, k12) - phi0(params, kout)

        eta2 = u_nodes[:, None] - eta1
        a = pa - eta1**2 / k1 - eta2**2 / k2 + (u_nodes**2)[:, None] / k12
        b = (
            pb
            - (eta_out[:, None] - u_nodes[None, :]) ** 2 / k3
            - (u_nodes**2)[None, :] / k12
            + (eta_out**2)[:, None] / kout
        )
        inside = np.abs(eta_out[:, None] - u_nodes[None, :]) <= w * (1.0 + 1e-12)
        p1 = phi1(1j * t * b)

        x = np.zeros(eta_out.size, dtype=complex)
        for i0 in range(0, eta_out.size, chunk):
            sl = slice(i0, min(i0 + chunk, eta_out.size))
            z2 = 1j * t * (a[None, :, :] + b[sl][:, :, None])
            bracket = 1j * t * (phi1(z2) - p1[sl][:, :, None])
            fib = np.sum(bracket / a[None, :, :], axis=2) * fiber_w[None, :]
            x[sl] = np.sum(fib * inside[sl] * delta, axis=1)
        x *= (k12 * kout) * np.exp(1j * t * (phi0(params, kout) - eta_out**2 / kout))

        sq = (1.0 + kout**2) ** cfg.s * float(np.trapezoid(np.abs(x) ** 2, dx=delta))
        per_k[kout] = math.sqrt((2.0 * math.pi) ** 2 * sq)

    total = math.sqrt(sum(v**2 for v in per_k.values()))
    restricted = math.sqrt(per_k[n] ** 2 + per_k[-n] ** 2)
    return ThirdDerivativeReport(total=total, restricted=restricted, per_k=per_k)


@dataclass(frozen=True)
class ScalingVerdict:
    samples: tuple
    fit: object
    predicted_exponent: float
    verdict: str
    restricted_fit: object
    wnorm_exponent: float


def illposed_scaling(Ns, params, s, betaInterval=0.05, t=0.1, etaQuadPoints=64):
    """Sweep R(N) = ||third derivative||_{H^s} / ||w_N||^3 and fit its exponent.

    Predicted exponent: 3/2 - alpha - 2s.  Verdict 'C3 fails' when the fitted
    exponent exceeds 0.1 (the map cannot be three-times differentiable), else
    'no failure detected'.  Both the full-norm and the k = +-N restricted fits
    are reported, along with the data-norm exponent (ideal value s + 1/4).
    """
    if len(Ns) < 4:
        raise InsufficientSpanError(f"need >= 4 sweep points, got {len(Ns)}")
    rows = []
    total_samples, restricted_samples, wnorm_samples = [], [], []
    for n in Ns:
        cfg = IllposedConfig(
            N=int(n), betaInterval=betaInterval, s=s, t=t, etaQuadPoints=etaQuadPoints
        )
        rep = third_derivative_norm(cfg, params)
        wn = wN_norm_exact(cfg, s)
        total_samples.append(RatioSample(int(n), rep.total / wn**3))
        restricted_samples.append(RatioSample(int(n), rep.restricted / wn**3))
        wnorm_samples.append(RatioSample(int(n), wn))
        rows.append((int(n), rep, wn))
    fit = fit_exponent(total_samples)
    rfit = fit_exponent(restricted_samples)
    wfit = fit_exponent(wnorm_samples)
    predicted = 1.5 - params.alpha - 2.0 * s
    verdict = "C3 fails" if fit.exponent > 0.1 else "no failure detected"
    return ScalingVerdict(
        samples=tuple(rows),
        fit=fit,
        predicted_exponent=predicted,
        verdict=verdict,
        restricted_fit=rfit,
        wnorm_exponent=wfit.exponent,
    )
