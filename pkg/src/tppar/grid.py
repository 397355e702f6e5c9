"""Discretisation of the torus-times-space group, Fourier transforms and norms.

The spatial box along axis ``i`` is ``[-L_i, L_i)`` with ``N_i`` nodes and
periodic wrap.  Time nodes are ``t_j = j T / N_t``.  Spectral arrays are kept
in numpy FFT order along every axis; ``grid.k`` and ``grid.xi[i]`` hold the
matching frequencies.

Normalisation: the time transform carries ``1/N_t`` (normalised Haar
measure), each spatial transform the cell width ``h_i = 2 L_i / N_i``, and the
inverse carries ``1/(2 L_i)`` so that ``inverse(forward(u)) == u``.

A *half* field stores only the nodes ``x_n >= 0`` of the last axis.  Its
transforms act on the time and tangential axes only.
"""

from dataclasses import dataclass, field, replace
from itertools import product
from math import comb

import numpy as np

from .errors import InvalidGrid, MeanNotZero, StateMismatch
from .symbols import parabolic_length

MEAN_TOL = 1e-12


@dataclass(frozen=True)
class GroupGrid:
    T: float
    n: int
    N_t: int
    L: tuple = ()
    N: tuple = ()
    half_space_axis: int | None = None
    t: np.ndarray = field(init=False, repr=False, compare=False)
    k: np.ndarray = field(init=False, repr=False, compare=False)
    x: tuple = field(init=False, repr=False, compare=False)
    xi: tuple = field(init=False, repr=False, compare=False)
    h: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "L", tuple(float(v) for v in self.L))
        object.__setattr__(self, "N", tuple(int(v) for v in self.N))
        object.__setattr__(self, "t", np.arange(self.N_t) * self.T / self.N_t)
        object.__setattr__(self, "k", 2 * np.pi / self.T * np.fft.fftfreq(self.N_t, 1.0 / self.N_t))
        object.__setattr__(self, "h", tuple(2 * L / N for L, N in zip(self.L, self.N)))
        object.__setattr__(self, "x", tuple(-L + np.arange(N) * 2 * L / N
                                            for L, N in zip(self.L, self.N)))
        object.__setattr__(self, "xi", tuple(np.pi / L * np.fft.fftfreq(N, 1.0 / N)
                                             for L, N in zip(self.L, self.N)))

    @property
    def shape(self):
        return (self.N_t,) + self.N

    @property
    def half_shape(self):
        return (self.N_t,) + self.N[:-1] + (self.N[-1] // 2,)

    @property
    def x_half(self):
        """Normal-axis nodes with x_n >= 0."""
        return self.x[-1][self.N[-1] // 2:]

    @property
    def volume_weight(self):
        """Quadrature weight of one node: (1/N_t) * prod h_i."""
        return float(np.prod(self.h)) / self.N_t

    def boundary(self):
        """Grid of the boundary torus-times-R^(n-1)."""
        return GroupGrid(self.T, self.n - 1, self.N_t, self.L[:-1], self.N[:-1])

    def refined(self, factor=2, axes=None):
        """Same box with node counts multiplied by ``factor`` on the chosen spatial axes."""
        axes = range(self.n) if axes is None else axes
        N = tuple(v * factor if i in axes else v for i, v in enumerate(self.N))
        return replace(self, N=N)

    def mesh_k(self):
        return self.k.reshape((-1,) + (1,) * self.n)

    def mesh_xi(self, ndim=None):
        ndim = self.n if ndim is None else ndim
        return tuple(self.xi[i].reshape((1,) + tuple(-1 if j == i else 1 for j in range(ndim)))
                     for i in range(ndim))


def make_grid(T, n, N_t, axes, half_space_axis=None):
    """Build a validated grid; ``axes`` is a list of (L_i, N_i) pairs."""
    axes = list(axes)
    if T <= 0:
        raise InvalidGrid("period must be positive")
    if n < 1 or len(axes) != n:
        raise InvalidGrid(f"need n >= 1 and exactly n axis specs, got n={n}, {len(axes)} axes")
    counts = [N_t] + [N for _, N in axes]
    if any(int(c) != c or c < 4 or c % 2 for c in counts):
        raise InvalidGrid(f"all point counts must be even and >= 4, got {counts}")
    if any(L <= 0 for L, _ in axes):
        raise InvalidGrid("half-lengths must be positive")
    if half_space_axis is not None and half_space_axis != n - 1:
        raise InvalidGrid("the half-space axis must be the last spatial axis")
    return GroupGrid(float(T), n, int(N_t), tuple(L for L, _ in axes),
                     tuple(int(N) for _, N in axes), half_space_axis)


@dataclass
class TPField:
    grid: GroupGrid
    data: np.ndarray
    state: str = "physical"
    half: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        expected = self.grid.half_shape if self.half else self.grid.shape
        if self.data.shape != expected:
            raise InvalidGrid(f"data shape {self.data.shape} does not match grid {expected}")

    def copy(self, data=None, state=None):
        return TPField(self.grid, self.data.copy() if data is None else data,
                       self.state if state is None else state, self.half)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.copy(self.data + other.data)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.copy(self.data - other.data)

    def __mul__(self, c):
        return self.copy(self.data * c)

    __rmul__ = __mul__


BoundaryField = TPField


def _check_compatible(a, b):
    if a.state != b.state or a.half != b.half or a.data.shape != b.data.shape:
        raise StateMismatch("fields differ in state, layout or shape")


def zeros(grid, half=False, state="physical"):
    return TPField(grid, np.zeros(grid.half_shape if half else grid.shape), state, half)


def from_function(grid, func, half=False):
    """Sample ``func(t, x_1, ..., x_n)`` on the (half) grid."""
    xs = list(grid.x)
    if half:
        xs[-1] = grid.x_half
    mesh = np.meshgrid(grid.t, *xs, indexing="ij")
    return TPField(grid, np.broadcast_to(func(*mesh), mesh[0].shape).astype(complex), half=half)


def synthesize_modes(grid, modes, half=False):
    """Sum of plane waves ``amp * exp(i k t + i xi . x)``; ``modes`` holds (k, xi, amp)."""
    out = zeros(grid, half)
    for k, xi, amp in modes:
        xi = list(xi)
        out.data += from_function(
            grid, lambda t, *x: amp * np.exp(1j * k * t + 1j * sum(q * y for q, y in zip(xi, x))),
            half).data
    return out


# ------------------------------------------------------------------ transforms

def _spatial_axes(u):
    n_per = u.grid.n - 1 if u.half else u.grid.n
    return list(range(n_per))


def _forward_array(data, grid, axes):
    out = np.fft.fft(data, axis=0) / grid.N_t
    for i in axes:
        N = grid.N[i]
        sign = (-1.0) ** np.fft.fftfreq(N, 1.0 / N)
        shape = [1] * data.ndim
        shape[i + 1] = N
        out = np.fft.fft(out, axis=i + 1) * (grid.h[i] * sign.reshape(shape))
    return out


def _inverse_array(data, grid, axes):
    out = np.fft.ifft(data, axis=0) * grid.N_t
    for i in axes:
        N = grid.N[i]
        sign = (-1.0) ** np.fft.fftfreq(N, 1.0 / N)
        shape = [1] * data.ndim
        shape[i + 1] = N
        out = np.fft.ifft(out * sign.reshape(shape), axis=i + 1) / grid.h[i]
    return out


def forward(u):
    if u.state != "physical":
        raise StateMismatch("forward transform expects a physical field")
    return TPField(u.grid, _forward_array(u.data, u.grid, _spatial_axes(u)), "spectral", u.half)


def inverse(w):
    if w.state != "spectral":
        raise StateMismatch("inverse transform expects a spectral field")
    return TPField(w.grid, _inverse_array(w.data, w.grid, _spatial_axes(w)), "physical", w.half)


def _as_spectral(u):
    return u if u.state == "spectral" else forward(u)


def _like(u, spec):
    return spec if u.state == "spectral" else inverse(spec)


# ----------------------------------------------------------------- projections

def project_mean(u):
    """Time mean: keeps only the k = 0 mode."""
    if u.state == "spectral":
        out = np.zeros_like(u.data)
        out[0] = u.data[0]
        return u.copy(out)
    return u.copy(np.broadcast_to(u.data.mean(axis=0), u.data.shape).copy())


def project_osc(u):
    """Purely oscillatory part: identity minus the time mean."""
    if u.state == "spectral":
        out = u.data.copy()
        out[0] = 0
        return u.copy(out)
    return u.copy(u.data - u.data.mean(axis=0, keepdims=True))


def mean_fraction(u):
    """||P u|| / ||u|| (0 for the zero field)."""
    total = np.linalg.norm(u.data)
    if total == 0:
        return 0.0
    if u.state == "spectral":
        return float(np.linalg.norm(u.data[0]) * np.sqrt(u.grid.N_t) / np.linalg.norm(
            np.fft.ifft(u.data, axis=0) * u.grid.N_t))
    return float(np.linalg.norm(u.data.mean(axis=0)) * np.sqrt(u.grid.N_t) / total)


def require_osc(u, what="field"):
    frac = mean_fraction(u)
    if frac > MEAN_TOL:
        raise MeanNotZero(f"{what} has a time-mean part (relative size {frac:.3e})",
                          {"relative_mean": frac})


# ------------------------------------------------------------------ multipliers

def nyquist_mask(grid, ndim):
    """Boolean mask, True on the unpaired Nyquist planes, over (t, first ndim axes)."""
    mask = np.zeros((grid.N_t,) + grid.N[:ndim], dtype=bool)
    mask[grid.N_t // 2] = True
    for i in range(ndim):
        idx = [slice(None)] * (ndim + 1)
        idx[i + 1] = grid.N[i] // 2
        mask[tuple(idx)] = True
    return mask


def apply_multiplier(u, mult, osc_only=False):
    """Pointwise spectral multiplication ``op[m] u``.

    ``mult(k, xi)`` receives broadcastable frequency arrays (``xi`` a tuple over
    the periodic spatial axes) and returns the symbol.  For half fields the
    symbol acts on (k, xi') and the normal axis is left untouched.  Nyquist
    planes are zeroed; with ``osc_only`` the k = 0 plane is zeroed as well and
    ``u`` must be purely oscillatory.
    """
    if osc_only:
        require_osc(u)
    spec = _as_spectral(u)
    axes = _spatial_axes(u)
    nd = len(axes)
    k = u.grid.k.reshape((-1,) + (1,) * nd)
    xi = tuple(u.grid.xi[i].reshape((1,) + tuple(-1 if j == i else 1 for j in range(nd)))
               for i in axes)
    drop = nyquist_mask(u.grid, nd)
    if osc_only:
        drop = drop | (k == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = np.broadcast_to(np.asarray(mult(k, xi), dtype=complex), drop.shape)
        sym = np.where(drop, 0.0, sym)
    if u.half:
        sym = sym[..., None]
    return _like(u, spec.copy(spec.data * sym))


def parabolic_multiplier(s, m):
    """Symbol |(k, xi)|^s with the parabolic length of order m."""
    def mult(k, xi):
        xi2 = sum(q ** 2 for q in xi) if xi else 0.0
        return parabolic_length_sq_form(k, xi2, m) ** s
    return mult


def parabolic_length_sq_form(k, xi_sq, m):
    return (np.abs(k) ** 2 + np.asarray(xi_sq) ** (2 * m)) ** (1.0 / (4 * m))


def derivative_multiplier(time_order, alpha):
    def mult(k, xi):
        out = (1j * k) ** time_order
        for q, a in zip(xi, alpha):
            out = out * (1j * q) ** a
        return out
    return mult


# ---------------------------------------------------------------- half fields

def restrict_half(u):
    """Multiply by the indicator of x_n >= 0 (full-box physical field)."""
    if u.state != "physical" or u.half:
        raise StateMismatch("restrict_half expects a physical full-box field")
    out = u.data.copy()
    out[..., : u.grid.N[-1] // 2] = 0
    return u.copy(out)


def extend_zero(u):
    """Embed a half field into the full box, zero on x_n < 0."""
    if u.state != "physical" or not u.half:
        raise StateMismatch("extend_zero expects a physical half field")
    out = np.zeros(u.grid.shape, dtype=complex)
    out[..., u.grid.N[-1] // 2:] = u.data
    return TPField(u.grid, out)


def take_half(u):
    """Nodes x_n >= 0 of a physical full-box field."""
    if u.state != "physical" or u.half:
        raise StateMismatch("take_half expects a physical full-box field")
    return TPField(u.grid, u.data[..., u.grid.N[-1] // 2:].copy(), half=True)


# ----------------------------------------------------------------------- norms

def lp_norm(u, p=2):
    if u.state != "physical":
        raise StateMismatch("norms are evaluated on physical fields")
    a = np.abs(u.data)
    if np.isinf(p):
        return float(a.max(initial=0.0))
    return float((np.sum(a ** p) * u.grid.volume_weight) ** (1.0 / p))


def spectral_l2_sq(u):
    """Plancherel side of ||u||_2^2 from the spectral coefficients."""
    spec = _as_spectral(u)
    axes = _spatial_axes(u)
    w = 1.0
    for i in axes:
        w /= 2 * u.grid.L[i]
    # the normal axis of a half field stays physical
    if u.half:
        w *= u.grid.h[-1]
    return float(np.sum(np.abs(spec.data) ** 2) * w)


def multi_indices(n, max_order):
    for total in range(max_order + 1):
        for alpha in product(range(total + 1), repeat=n):
            if sum(alpha) == total:
                yield alpha


def fd_weights(offsets, deriv):
    """Finite-difference weights for the ``deriv``-th derivative on unit spacing.

    Solves the Vandermonde moment system sum_j w_j s_j^q = q! delta_{q,deriv}.
    """
    s = np.asarray(offsets, dtype=float)
    n = len(s)
    V = np.vander(s, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(V, rhs)


def fd_derivative(data, h, deriv, accuracy=6, axis=-1):
    """Derivative along ``axis`` of non-periodic samples, one-sided near the ends."""
    data = np.moveaxis(np.asarray(data), axis, -1)
    N = data.shape[-1]
    width = deriv + accuracy - 1 if deriv % 2 == 0 else deriv + accuracy
    width = min(width, N)
    half = width // 2
    out = np.empty_like(data, dtype=complex)
    for i in range(N):
        start = min(max(i - half, 0), N - width)
        offs = np.arange(start, start + width) - i
        w = fd_weights(offs, deriv) / h ** deriv
        out[..., i] = data[..., start:start + width] @ w
    return np.moveaxis(out, -1, axis)


def _derivative(u, time_order, alpha):
    """∂_t^a ∂_x^alpha u: spectral on periodic axes, finite differences on the normal half axis."""
    if u.half:
        normal = alpha[-1]
        v = apply_multiplier(u, derivative_multiplier(time_order, alpha[:-1]))
        if normal:
            v = v.copy(fd_derivative(v.data, u.grid.h[-1], normal))
        return v
    return apply_multiplier(u, derivative_multiplier(time_order, alpha))


def sobolev_norm(u, p=2, m=1):
    """(||∂_t u||_p^p + sum_{|alpha| <= 2m} ||∂^alpha u||_p^p)^(1/p)."""
    n = u.grid.n
    parts = [lp_norm(_derivative(u, 1, (0,) * n), p)]
    parts += [lp_norm(_derivative(u, 0, a), p) for a in multi_indices(n, 2 * m)]
    return float(np.sum(np.asarray(parts) ** p) ** (1.0 / p))


def bessel_norm(u, s, p=2, m=1):
    """||op[|(k, xi)|^s] u||_p on purely oscillatory fields (half fields are zero-extended)."""
    if u.half:
        u = extend_zero(u)
    return lp_norm(apply_multiplier(u, parabolic_multiplier(s, m), osc_only=True), p)


def trace_norm(g, kappa, p=2, m=1):
    """Multiplier proxy for the trace-space norm of order kappa in time."""
    require_osc(g, "boundary datum")
    if not np.any(g.data):
        return 0.0
    lifted = apply_multiplier(g, parabolic_multiplier(2 * m * kappa, m), osc_only=True)
    return lp_norm(g, p) + lp_norm(lifted, p)


@dataclass(frozen=True)
class TraceSpaceSpec:
    m: int
    p: float
    orders: tuple

    @property
    def kappa(self):
        return [1 - mj / (2 * self.m) - 1 / (2 * self.m * self.p) for mj in self.orders]

    @property
    def iota(self):
        return [1 - (j - 1) / (2 * self.m) - 1 / (2 * self.m * self.p)
                for j in range(1, self.m + 1)]


def count_multi_indices(n, max_order):
    return comb(n + max_order, n)
