"""Discrete spectral fields on T_x x R_y (and T_x x R_y^2) and their norms.

Representation
--------------
The nonperiodic y (and t) directions are truncated to periodic boxes, so every
field is a trigonometric polynomial and all continuum formulas survive as
lattice sums.  A SpectralField stores coefficients C(k, q) in FFT order with
the synthesis convention

    u(x, y)    = sum_k sum_q C(k, q) * deta^d * exp(i(k x + eta_q . y)),

and a SpaceTimeField stores G(p, k, q) with

    u(t, x, y) = sum_{p,k,q} G * dtau * deta^d * exp(i(tau_p t + k x + eta_q . y)),

i.e. coefficients are continuum-normalized densities and the lattice spacings
are the quadrature weights.  With these conventions Parseval is exact:

    ||u||_{L2(TxR^d)}^2    = (2 pi)^{1+d} deta^d  sum |C|^2
    ||u||_{L2(RtxTxR^d)}^2 = (2 pi)^{2+d} dtau deta^d sum |G|^2

The x axis carries 2*kMax+1 collocation points (modes k in [-kMax, kMax], no
Nyquist ambiguity); y and t axes are even-length power-of-two lattices whose
Nyquist rows are kept identically zero by every constructor so that real
fields have exact Hermitian symmetry.

Mean-zero condition: all k = 0 coefficients vanish.  project_mean_zero
enforces it; Bourgain-type norms skip the k = 0 column, where the phase is
undefined (those coefficients are zero for any admissible field).
"""

import json
import math
import struct
from dataclasses import dataclass, asdict, replace

import numpy as np

from . import symbols
from .errors import (
    BandExceedsGridError,
    ExponentRangeError,
    InvalidSpecError,
    ShapeMismatchError,
)


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Lattice geometry: x modes, y box/resolution, time window/resolution."""

    kMax: int
    yPoints: int
    yLength: float
    yDims: int = 1
    tPoints: int = 64
    tWindow: float = 2.0

    def __post_init__(self):
        problems = []
        if self.kMax < 1:
            problems.append(f"kMax must be >= 1, got {self.kMax}")
        if not (_is_pow2(self.yPoints) and self.yPoints >= 8):
            problems.append(
                f"yPoints must be a power of two >= 8, got {self.yPoints}"
            )
        if not (_is_pow2(self.tPoints) and self.tPoints >= 8):
            problems.append(
                f"tPoints must be a power of two >= 8, got {self.tPoints}"
            )
        if not self.yLength > 0:
            problems.append(f"yLength must be positive, got {self.yLength}")
        if not self.tWindow > 0:
            problems.append(f"tWindow must be positive, got {self.tWindow}")
        if self.yDims not in (1, 2):
            problems.append(f"yDims must be 1 or 2, got {self.yDims}")
        if problems:
            raise InvalidSpecError(problems)

    # lattice spacings
    @property
    def nx(self):
        return 2 * self.kMax + 1

    @property
    def deta(self):
        return 2.0 * math.pi / self.yLength

    @property
    def dy(self):
        return self.yLength / self.yPoints

    @property
    def dt(self):
        return 2.0 * self.tWindow / self.tPoints

    @property
    def dtau(self):
        return math.pi / self.tWindow

    # axes (FFT order for frequencies, physical order for samples)
    def k_axis(self):
        return np.fft.fftfreq(self.nx, 1.0 / self.nx).astype(int)

    def eta_axis(self):
        return np.fft.fftfreq(self.yPoints, 1.0 / self.yPoints) * self.deta

    def tau_axis(self):
        return np.fft.fftfreq(self.tPoints, 1.0 / self.tPoints) * self.dtau

    def x_axis(self):
        return 2.0 * math.pi * np.arange(self.nx) / self.nx

    def y_axis(self):
        return -0.5 * self.yLength + self.dy * np.arange(self.yPoints)

    def t_axis(self):
        return -self.tWindow + self.dt * np.arange(self.tPoints)

    @property
    def spatial_shape(self):
        return (self.nx,) + (self.yPoints,) * self.yDims

    @property
    def st_shape(self):
        return (self.tPoints,) + self.spatial_shape

    def eta_sq_grid(self):
        """|eta|^2 on the y-frequency lattice, shape (yPoints,)*yDims."""
        e = self.eta_axis()
        if self.yDims == 1:
            return e**2
        return e[:, None] ** 2 + e[None, :] ** 2

    @property
    def xy_measure(self):
        return (2.0 * math.pi) ** (1 + self.yDims) * self.deta**self.yDims

    @property
    def st_measure(self):
        return self.xy_measure * 2.0 * math.pi * self.dtau


def make_grid(kMax, yPoints, yLength, yDims=1, tPoints=64, tWindow=2.0):
    """Validated GridSpec constructor; raises InvalidSpecError listing all violations."""
    return GridSpec(kMax, yPoints, yLength, yDims, tPoints, tWindow)


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SpectralField:
    """Coefficients over the (k, eta) lattice; immutable after construction."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.spatial_shape:
            raise ShapeMismatchError(
                f"coeffs shape {self.coeffs.shape} != grid {self.grid.spatial_shape}"
            )
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))

    def l2_norm(self):
        return math.sqrt(self.grid.xy_measure * float(np.sum(np.abs(self.coeffs) ** 2)))


@dataclass(frozen=True)
class SpaceTimeField:
    """Coefficients over the (tau, k, eta) lattice; immutable after construction."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.st_shape:
            raise ShapeMismatchError(
                f"coeffs shape {self.coeffs.shape} != grid {self.grid.st_shape}"
            )
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))

    def l2_norm(self):
        return math.sqrt(self.grid.st_measure * float(np.sum(np.abs(self.coeffs) ** 2)))


def zero_field(grid):
    return SpectralField(grid, np.zeros(grid.spatial_shape, dtype=complex))


def _alt_signs(n):
    # (-1)^q along an FFT-ordered axis, from the -L/2 (or -tWindow) origin shift
    q = np.fft.fftfreq(n, 1.0 / n).astype(int)
    return np.where(q % 2 == 0, 1.0, -1.0)


def _y_sign_array(grid):
    s = _alt_signs(grid.yPoints)
    if grid.yDims == 1:
        return s
    return s[:, None] * s[None, :]


def project_mean_zero(f):
    """Zero the k = 0 plane; idempotent, touches nothing else."""
    c = np.array(f.coeffs)
    if isinstance(f, SpaceTimeField):
        c[:, 0] = 0.0
        return SpaceTimeField(f.grid, c)
    c[0] = 0.0
    return SpectralField(f.grid, c)


def to_physical(f):
    """Spectral -> collocation samples on (x_j, y_m); returns a complex array."""
    g = f.grid
    a = f.coeffs * _y_sign_array(g) * g.deta**g.yDims
    return np.fft.ifftn(a) * (g.nx * g.yPoints**g.yDims)


def to_spectral(samples, grid):
    """Collocation samples -> SpectralField (exact inverse of to_physical)."""
    samples = np.asarray(samples)
    if samples.shape != grid.spatial_shape:
        raise ShapeMismatchError(
            f"sample shape {samples.shape} != grid {grid.spatial_shape}"
        )
    a = np.fft.fftn(samples) / (grid.nx * grid.yPoints**grid.yDims)
    return SpectralField(grid, a * _y_sign_array(grid) / grid.deta**grid.yDims)


def st_to_physical(F):
    """Space-time spectral -> samples on (t_n, x_j, y_m)."""
    g = F.grid
    signs = _alt_signs(g.tPoints).reshape((-1,) + (1,) * (1 + g.yDims))
    a = F.coeffs * signs * _y_sign_array(g) * (g.dtau * g.deta**g.yDims)
    return np.fft.ifftn(a) * (g.tPoints * g.nx * g.yPoints**g.yDims)


def st_from_physical(samples, grid):
    samples = np.asarray(samples)
    if samples.shape != grid.st_shape:
        raise ShapeMismatchError(
            f"sample shape {samples.shape} != grid {grid.st_shape}"
        )
    a = np.fft.fftn(samples) / (grid.tPoints * grid.nx * grid.yPoints**grid.yDims)
    signs = _alt_signs(grid.tPoints).reshape((-1,) + (1,) * (1 + grid.yDims))
    return SpaceTimeField(
        grid, a * signs * _y_sign_array(grid) / (grid.dtau * grid.deta**grid.yDims)
    )


def phi_grid(grid, params):
    """phi(k, eta) over the lattice; the (unused) k = 0 slot is set to 0."""
    k = grid.k_axis().astype(float)
    k[0] = np.nan
    shape = (grid.nx,) + (1,) * grid.yDims
    phi = symbols.phase_grid(params, k.reshape(shape), grid.eta_sq_grid()[None, ...])
    phi[0] = 0.0
    return phi


def _bracket(x):
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormSpec:
    """Selects one of the norm families and its exponents.

    flavor: 'sobolev' | 'x' | 'xweighted' | 'y' | 'z' | 'mixed'.
    s1/s2 weight <k>/<eta>; b weights the modulation bracket <tau - phi>;
    beta is the exponent of the extra (1 + <sigma>/<k>^(alpha+1)) factor used
    by the weighted/endpoint flavors; mixedR/P/Q are the Lebesgue exponents of
    the mixed flavor (the z flavor pins its quadratic part at b = -1/2).
    """

    flavor: str
    s1: float = 0.0
    s2: float = 0.0
    b: float = 0.0
    beta: float = 0.0
    mixedR: float = 2.0
    mixedP: float = 2.0
    mixedQ: float = 2.0

    def __post_init__(self):
        problems = []
        if self.flavor not in ("sobolev", "x", "xweighted", "y", "z", "mixed"):
            problems.append(f"unknown norm flavor {self.flavor!r}")
        if self.beta < 0:
            problems.append(f"beta must be >= 0, got {self.beta}")
        if self.flavor == "mixed":
            if not (1.0 <= self.mixedR <= 2.0):
                problems.append(f"mixed r must lie in [1, 2], got {self.mixedR}")
            for name, v in (("p", self.mixedP), ("q", self.mixedQ)):
                if not v >= 1.0:
                    problems.append(f"mixed {name} must lie in [1, inf], got {v}")
        if problems:
            raise InvalidSpecError(problems)


def sobolev_norm(f, s1, s2):
    """Anisotropic Sobolev norm ||<k>^s1 <eta>^s2 C|| with the lattice measure."""
    g = f.grid
    wk = _bracket(g.k_axis()) ** s1
    weta = _bracket(np.sqrt(g.eta_sq_grid())) ** s2
    w = wk.reshape((-1,) + (1,) * g.yDims) * weta[None, ...]
    total = float(np.sum(np.abs(w * f.coeffs) ** 2))
    return math.sqrt(g.xy_measure * total)


def _bourgain_weights(F, spec, params):
    g = F.grid
    phi = phi_grid(g, params)
    tau = g.tau_axis().reshape((-1,) + (1,) * (1 + g.yDims))
    sigma = tau - phi[None, ...]
    bs = _bracket(sigma)
    wk = _bracket(g.k_axis()) ** spec.s1
    weta = _bracket(np.sqrt(g.eta_sq_grid())) ** spec.s2
    base = wk.reshape((-1,) + (1,) * g.yDims) * weta[None, ...]
    if spec.beta != 0.0:
        ka = _bracket(g.k_axis()) ** (params.alpha + 1.0)
        extra = (1.0 + bs / ka.reshape((-1,) + (1,) * g.yDims)) ** spec.beta
    else:
        extra = 1.0
    return base[None, ...], bs, extra


def bourgain_norm(F, spec, params):
    """Bourgain-family norms of a SpaceTimeField.

    x:          l2 of <k>^s1 <eta>^s2 <sigma>^b |G|
    xweighted:  additionally multiplied by (1 + <sigma>/<k>^(alpha+1))^beta
    y:          l2_{k,eta} of l1_tau of <k>^s1 <eta>^s2 <sigma>^(-1) (weight)^beta |G|
    z:          y  +  xweighted at b = -1/2

    All carry the lattice measures that make the zero-exponent case coincide
    with the space-time L2 norm; the k = 0 column is excluded (mean zero).
    """
    if not isinstance(F, SpaceTimeField):
        raise InvalidSpecError(["bourgain_norm expects a SpaceTimeField"])
    if spec.flavor == "z":
        y = bourgain_norm(F, replace(spec, flavor="y"), params)
        xw = bourgain_norm(F, replace(spec, flavor="xweighted", b=-0.5), params)
        return y + xw
    if spec.flavor not in ("x", "xweighted", "y"):
        raise InvalidSpecError(
            [f"flavor {spec.flavor!r} is not a space-time Bourgain flavor"]
        )

    g = F.grid
    base, bs, extra = _bourgain_weights(F, spec, params)
    absG = np.abs(F.coeffs)
    mask = np.ones(g.nx, dtype=bool)
    mask[0] = False
    mask = mask.reshape((1, -1) + (1,) * g.yDims)

    if spec.flavor in ("x", "xweighted"):
        w = base * bs**spec.b
        if spec.flavor == "xweighted":
            w = w * extra
        total = float(np.sum((w * absG * mask) ** 2))
        return math.sqrt(g.st_measure * total)

    # y flavor: l1 in tau first
    w = base * bs**-1.0 * (extra if spec.beta != 0.0 else 1.0)
    inner = g.dtau * np.sum(w * absG * mask, axis=0)
    total = float(np.sum(inner**2))
    prefac = (2.0 * math.pi) ** (0.5 * (2 + g.yDims))
    return prefac * math.sqrt(g.deta**g.yDims * total)


def mixed_norm(F, r, p, q):
    """Fourier-in-x mixed norm: per k take L^q_y then L^p_t, then l^{r'}_k.

    The x transform carries the unitary sqrt(2 pi) factor, so r = p = q = 2
    reproduces the space-time L2 norm exactly while single-k fields give
    r-independent values.
    """
    if not (1.0 <= r <= 2.0):
        raise ExponentRangeError(f"r must lie in [1, 2], got {r}")
    if not (p >= 1.0 and q >= 1.0):
        raise ExponentRangeError(f"p, q must lie in [1, inf], got p={p}, q={q}")
    g = F.grid
    # inverse transform in tau and y only: h(k; t, y), unitary in x
    axes_shape = (-1,) + (1,) * (1 + g.yDims)
    a = F.coeffs * _alt_signs(g.tPoints).reshape(axes_shape) * _y_sign_array(g)
    a = a * (g.dtau * g.deta**g.yDims)
    y_axes = tuple(range(2, 2 + g.yDims))
    h = np.fft.ifftn(a, axes=(0,) + y_axes) * (g.tPoints * g.yPoints**g.yDims)
    h = h * math.sqrt(2.0 * math.pi)
    mod = np.abs(h)

    dy_d = g.dy**g.yDims
    if math.isinf(q):
        ly = mod.max(axis=y_axes)
    else:
        ly = (dy_d * np.sum(mod**q, axis=y_axes)) ** (1.0 / q)
    if math.isinf(p):
        lt = ly.max(axis=0)
    else:
        lt = (g.dt * np.sum(ly**p, axis=0)) ** (1.0 / p)
    if r == 1.0:
        return float(lt.max())
    rp = r / (r - 1.0)
    return float(np.sum(lt**rp) ** (1.0 / rp))


def field_norm(f, spec, params=None):
    """Dispatch a NormSpec: sobolev on SpectralField, the rest on SpaceTimeField."""
    if spec.flavor == "sobolev":
        return sobolev_norm(f, spec.s1, spec.s2)
    if spec.flavor == "mixed":
        return mixed_norm(f, spec.mixedR, spec.mixedP, spec.mixedQ)
    return bourgain_norm(f, spec, params)


# ---------------------------------------------------------------------------
# random band-limited data


@dataclass(frozen=True)
class BandSpec:
    """Supported band: kLo <= |k| <= kHi and etaLo <= |eta| <= etaHi."""

    kLo: int
    kHi: int
    etaHi: float
    etaLo: float = 0.0


def _conj_mirror(arr):
    out = np.conj(arr)
    for ax in range(arr.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def _zero_nyquist(c, grid, st=False):
    off = 1 if st else 0
    for ax in range(grid.yDims):
        idx = [slice(None)] * c.ndim
        idx[off + 1 + ax] = grid.yPoints // 2
        c[tuple(idx)] = 0.0
    if st:
        c[grid.tPoints // 2] = 0.0


def _band_mask(grid, band):
    if band.kHi > grid.kMax:
        raise BandExceedsGridError(
            f"k band up to {band.kHi} exceeds grid kMax {grid.kMax}"
        )
    eta_nyq = grid.deta * grid.yPoints / 2
    if band.etaHi > eta_nyq:
        raise BandExceedsGridError(
            f"eta band up to {band.etaHi} exceeds lattice Nyquist {eta_nyq:g}"
        )
    absk = np.abs(grid.k_axis())
    mk = (absk >= band.kLo) & (absk <= band.kHi)
    abseta = np.sqrt(grid.eta_sq_grid())
    meta = (abseta >= band.etaLo) & (abseta <= band.etaHi)
    return mk.reshape((-1,) + (1,) * grid.yDims) & meta[None, ...]


def random_field(grid, band, seed, real=True, side=None):
    """Band-limited complex-Gaussian data; deterministic for a fixed seed.

    real=True Hermitian-symmetrizes so physical samples are real.  side='+'
    or '-' instead keeps only positive/negative k (complex-valued field, used
    by the directional interaction generators).
    """
    rng = np.random.default_rng(seed)
    z = (
        rng.standard_normal(grid.spatial_shape)
        + 1j * rng.standard_normal(grid.spatial_shape)
    ) / math.sqrt(2.0)
    z *= _band_mask(grid, band)
    z[0] = 0.0
    _zero_nyquist(z, grid)
    if real:
        z = (z + _conj_mirror(z)) / math.sqrt(2.0)
        z[0] = 0.0
    elif side == "+":
        z[grid.k_axis() < 0] = 0.0
    elif side == "-":
        z[grid.k_axis() > 0] = 0.0
    return SpectralField(grid, z)


def st_random_field(grid, band, seed, real=True):
    """Random mean-zero SpaceTimeField with band-limited (k, eta) support."""
    rng = np.random.default_rng(seed)
    shape = grid.st_shape
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    z *= _band_mask(grid, band)[None, ...]
    z[:, 0] = 0.0
    _zero_nyquist(z, grid, st=True)
    if real:
        z = (z + _conj_mirror(z)) / math.sqrt(2.0)
        z[:, 0] = 0.0
    return SpaceTimeField(grid, z)


# ---------------------------------------------------------------------------
# embedding / cropping / exact products


def _embed_axis_counts(n):
    pos = (n + 1) // 2
    return pos, n - pos


def _embed(arr, new_shape):
    # separable per-axis scatter: positive frequencies keep their index,
    # negative ones shift to the tail of the longer axis
    out = np.zeros(new_shape, dtype=complex)
    idx_maps = []
    for n_old, n_new in zip(arr.shape, new_shape):
        pos, _ = _embed_axis_counts(n_old)
        idx = np.concatenate([np.arange(pos), n_new - n_old + np.arange(pos, n_old)])
        idx_maps.append(idx)
    out[np.ix_(*idx_maps)] = arr
    return out


def _crop(arr, new_shape):
    idx_maps = []
    for n_old, n_new in zip(arr.shape, new_shape):
        pos, _ = _embed_axis_counts(n_new)
        idx = np.concatenate([np.arange(pos), n_old - n_new + np.arange(pos, n_new)])
        idx_maps.append(idx)
    return arr[np.ix_(*idx_maps)]


def embed_field(f, grid2):
    """Re-represent a field on a finer/larger grid sharing deta (and dtau)."""
    g = f.grid
    if abs(grid2.deta - g.deta) > 1e-14 * g.deta or grid2.yDims != g.yDims:
        raise InvalidSpecError(["embedding requires identical deta and yDims"])
    if isinstance(f, SpaceTimeField):
        if abs(grid2.dtau - g.dtau) > 1e-14 * g.dtau:
            raise InvalidSpecError(["embedding requires identical dtau"])
        return SpaceTimeField(grid2, _embed(f.coeffs, grid2.st_shape))
    return SpectralField(grid2, _embed(f.coeffs, grid2.spatial_shape))


def product_grid(grid):
    """Grid holding the exact quadratic product: doubled bands everywhere.

    The y box length (hence deta) and tWindow (hence dtau) are preserved;
    doubling yPoints/tPoints doubles the representable frequency ranges.
    """
    return replace(
        grid,
        kMax=2 * grid.kMax,
        yPoints=2 * grid.yPoints,
        tPoints=2 * grid.tPoints,
    )


def product_exact(fa, fb):
    """Exact pointwise product of two SpectralFields, no aliasing.

    Both inputs are embedded on the doubled grid (which holds every mode of
    the convolution), multiplied in collocation space, and transformed back.
    """
    if fa.grid != fb.grid:
        raise InvalidSpecError(["product requires matching grids"])
    g2 = product_grid(fa.grid)
    ua = to_physical(embed_field(fa, g2))
    ub = to_physical(embed_field(fb, g2))
    return to_spectral(ua * ub, g2)


def st_product_exact(Fa, Fb):
    """Exact space-time pointwise product on the doubled (tau, k, eta) grid."""
    if Fa.grid != Fb.grid:
        raise InvalidSpecError(["product requires matching grids"])
    g2 = product_grid(Fa.grid)
    ua = st_to_physical(embed_field(Fa, g2))
    ub = st_to_physical(embed_field(Fb, g2))
    return st_from_physical(ua * ub, g2)


def _next_pow2(n):
    m = 8
    while m < n:
        m *= 2
    return m


def dealias_grid(grid, frac):
    """Padded grid implementing the zero-padding rule for a retention fraction.

    deta is preserved: padding adds high-frequency headroom, it does not
    refine the lattice.
    """
    nx_p = math.ceil(grid.nx / frac)
    if nx_p % 2 == 0:
        nx_p += 1
    return replace(
        grid,
        kMax=(nx_p - 1) // 2,
        yPoints=_next_pow2(math.ceil(grid.yPoints / frac)),
    )


def quadratic_product(fa, fb, dealias=2.0 / 3.0):
    """Dealiased product truncated back to the inputs' grid.

    Zero-pads each axis by 1/dealias before the collocation multiply; with the
    default 2/3 fraction every retained mode of the product is alias-free, and
    inputs band-limited to a third of the grid multiply exactly.
    """
    if fa.grid != fb.grid:
        raise InvalidSpecError(["product requires matching grids"])
    if not (0.0 < dealias <= 1.0):
        raise InvalidSpecError([f"dealias fraction must lie in (0, 1], got {dealias}"])
    g = fa.grid
    gp = dealias_grid(g, dealias)
    ua = to_physical(embed_field(fa, gp))
    ub = to_physical(embed_field(fb, gp))
    prod = to_spectral(ua * ub, gp)
    c = _crop(prod.coeffs, g.spatial_shape)
    _zero_nyquist(c, g)
    return SpectralField(g, c)


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"KPLF\x01"


def save_field(path, field):
    """Self-describing binary container: magic, JSON header, little-endian c16."""
    kind = "spacetime" if isinstance(field, SpaceTimeField) else "spectral"
    header = {
        "kind": kind,
        "grid": asdict(field.grid),
        "shape": list(field.coeffs.shape),
        "dtype": "complex128",
        "byteorder": "little",
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(field.coeffs).astype("<c16").tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise InvalidSpecError([f"bad container magic {magic!r}"])
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        raw = fh.read()
    grid = GridSpec(**header["grid"])
    arr = np.frombuffer(raw, dtype="<c16").reshape(header["shape"]).astype(complex)
    if header["kind"] == "spacetime":
        return SpaceTimeField(grid, arr)
    return SpectralField(grid, arr)


def field_to_csv(field, path, max_entries=1 << 20):
    """Plain-text dump (one coefficient per row) for small grids."""
    c = field.coeffs
    if c.size > max_entries:
        raise InvalidSpecError(
            [f"field has {c.size} entries; CSV export is capped at {max_entries}"]
        )
    g = field.grid
    st = isinstance(field, SpaceTimeField)
    k = g.k_axis()
    eta = g.eta_axis()
    tau = g.tau_axis()
    cols = (["tau"] if st else []) + ["k"] + [f"eta{i+1}" for i in range(g.yDims)]
    close = False
    if isinstance(path, (str, bytes)):
        fh = open(path, "w", encoding="utf-8")
        close = True
    else:
        fh = path
    try:
        fh.write(",".join(cols + ["re", "im"]) + "\n")
        for idx in np.ndindex(c.shape):
            vals = []
            j = 0
            if st:
                vals.append(repr(float(tau[idx[0]])))
                j = 1
            vals.append(str(int(k[idx[j]])))
            for ax in range(g.yDims):
                vals.append(repr(float(eta[idx[j + 1 + ax]])))
            z = c[idx]
            fh.write(",".join(vals + [repr(z.real), repr(z.imag)]) + "\n")
    finally:
        if close:
            fh.close()
