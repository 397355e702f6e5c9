"""Time-periodic problems on the half space x_n > 0.

The zero-trace part is u = A_+^{-1} Y_+ A_-^{-1} f, where A_± are the Fourier
multipliers M_±(k, xi', xi_n) from the factorisation ik + A^H = a M_+ M_-.
Boundary data are lifted with per-mode exponential-sum kernels built from the
roots of M_+.  Traces are symbol traces, D_n^beta = (-i d/dx_n)^beta.

Only the principal parts of the interior and boundary operators are used.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import IllConditionedTrace, SingularCharMatrix, StateMismatch, SymbolVanishes
from .grid import (TPField, _forward_array, _inverse_array, extend_zero, fd_weights,
                   lp_norm, parabolic_multiplier, apply_multiplier, require_osc,
                   restrict_half, sobolev_norm, take_half, trace_norm, TraceSpaceSpec)
from .symbols import (OperatorTuple, char_matrix_batch, check_agmon_ray, factorize,
                      principal_part, z_coeffs)

CLUSTER_TOL = 1e-6
CONTOUR_NODES = 256
COND_LIMIT = 1e10
DECAY_WARN = 1e-8


class TruncationWarning(UserWarning):
    """The box is too short for the slowest boundary-layer decay."""


@dataclass
class HalfSpaceProblem:
    tuple_: OperatorTuple
    grid: object
    f: TPField
    g: list
    bc_kind: str = "dirichlet"


@dataclass
class FactorTable:
    grid: object
    tuple_: OperatorTuple
    index: np.ndarray        # flat indices into the (N_t, N_1..N_{n-1}) tangential plane
    fact: object             # SymbolFactorization over the retained modes
    margin_min: float = field(default=np.inf)
    margin_max: float = field(default=np.inf)

    @property
    def size(self):
        return len(self.index)

    @property
    def tangential_shape(self):
        return (self.grid.N_t,) + self.grid.N[:-1]


def _tangential_modes(grid):
    """(k, xi') of every tangential mode, flattened, plus the retained mask."""
    shape = (grid.N_t,) + grid.N[:-1]
    mesh = np.meshgrid(grid.k, *grid.xi[:-1], indexing="ij")
    k = mesh[0].ravel()
    xp = np.stack([q.ravel() for q in mesh[1:]], axis=-1) if grid.n > 1 else np.zeros((k.size, 0))
    keep = np.ones(shape, dtype=bool)
    keep[0] = False
    keep[grid.N_t // 2] = False
    for i in range(grid.n - 1):
        idx = [slice(None)] * len(shape)
        idx[i + 1] = grid.N[i] // 2
        keep[tuple(idx)] = False
    return k, xp, keep.ravel()


def build_factor_table(tuple_, grid):
    """Root split and monic half-symbol coefficients at every retained (k, xi'), k != 0."""
    k, xp, keep = _tangential_modes(grid)
    index = np.nonzero(keep)[0]
    # a grid mode with a real root names itself; otherwise the ray check reports
    fact = factorize(tuple_.interior, k[index], xp[index])
    for theta in (np.pi / 2, -np.pi / 2):
        res = check_agmon_ray(tuple_.interior, theta)
        if not res.ok:
            raise SymbolVanishes(f"Agmon condition fails on the ray theta={theta:+.4f}", res.witness)
    table = FactorTable(grid, tuple_, index, fact,
                        float(fact.margin.min()), float(fact.margin.max()))
    min_decay = float(np.min(fact.rho_plus.imag))
    if np.exp(-min_decay * grid.L[-1]) > DECAY_WARN:
        warnings.warn(f"slowest boundary layer decays only to {np.exp(-min_decay * grid.L[-1]):.2e} "
                      f"over L_n={grid.L[-1]}; consider L_n >= {18.4 / min_decay:.3g}",
                      TruncationWarning, stacklevel=2)
    return table


def _full_spectrum(u):
    g = u.grid
    return _forward_array(u.data, g, range(g.n))


def _from_full_spectrum(data, like):
    g = like.grid
    return TPField(g, _inverse_array(data, g, range(g.n)))


def factor_values(table, side, xi_n=None):
    """M_±(k, xi', xi_n) on the retained modes, shape (modes, len(xi_n))."""
    xi_n = table.grid.xi[-1] if xi_n is None else np.asarray(xi_n)
    c = table.fact.c_plus if side == "plus" else table.fact.c_minus
    z = np.broadcast_to(xi_n.astype(complex), (table.size, len(xi_n)))
    return _kernels.horner(c, z)


def apply_factor_inverse(u, table, side):
    """Multiply the full (k, xi', xi_n) spectrum of a box field by 1/M_±.

    The minus side also carries the factor 1/a.  Non-retained tangential modes
    and the normal Nyquist plane are set to zero.
    """
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    if u.half or u.state != "physical":
        raise StateMismatch("apply_factor_inverse expects a physical full-box field")
    require_osc(u)
    spec = _full_spectrum(u)
    N_n = u.grid.N[-1]
    flat = spec.reshape(-1, N_n)
    out = np.zeros_like(flat)
    vals = factor_values(table, side)
    if side == "minus":
        vals = vals * table.fact.leading
    out[table.index] = flat[table.index] / vals
    out[:, N_n // 2] = 0
    return _from_full_spectrum(out.reshape(spec.shape), u)


def apply_factor(u, table, side):
    """Multiply the spectrum by M_± (times a on the minus side); inverse of the above."""
    spec = _full_spectrum(u)
    N_n = u.grid.N[-1]
    flat = spec.reshape(-1, N_n)
    out = np.zeros_like(flat)
    vals = factor_values(table, side)
    if side == "minus":
        vals = vals * table.fact.leading
    out[table.index] = flat[table.index] * vals
    out[:, N_n // 2] = 0
    return _from_full_spectrum(out.reshape(spec.shape), u)


def _zero_trace_parts(f, table, midpoint=True):
    if not f.half:
        raise StateMismatch("solve_zero_trace expects a half-box field")
    require_osc(f, "right-hand side")
    w = apply_factor_inverse(extend_zero(f), table, "minus")
    v = apply_factor_inverse(_cut_half(w, midpoint), table, "plus")
    return take_half(v), w


def _cut_half(w, midpoint=True):
    """Y_+ w; with ``midpoint`` the node on the jump gets the weight 1/2."""
    out = restrict_half(w)
    if midpoint:
        out.data[..., w.grid.N[-1] // 2] *= 0.5
    return out


def solve_zero_trace(f, table, midpoint=True):
    """u = A_+^{-1} Y_+ A_-^{-1} f restricted to the half box.

    The indicator is sampled with Y_+(0) = 1/2 unless ``midpoint`` is False.
    """
    return _zero_trace_parts(f, table, midpoint)[0]


def _quotients(tuple_, table):
    """Per-mode quotient coefficients Q_j of B_j = Q_j M_+ + R_j, ascending, (modes, m, m)."""
    m = tuple_.m
    q_monic = table.fact.c_plus[:, ::-1]
    out = np.zeros((table.size, m, m), dtype=complex)
    for j, b in enumerate(tuple_.boundary):
        r = z_coeffs(principal_part(b), table.fact.xi_prime)
        for top in range(r.shape[1] - 1, m - 1, -1):
            lead = r[:, top].copy()
            out[:, j, top - m] = lead
            r[:, top - m:top + 1] -= lead[:, None] * q_monic
    return out


def _boundary_ops_zero_trace(tuple_, table, u1, w, F=None, low_traces=False):
    """B_j u_1 at x_n = 0 for u_1 = A_+^{-1} Y_+ w, per retained mode, shape (modes, m).

    Split B_j = Q_j M_+ + R_j.  Since M_+(D_n) u_1 = w on x_n > 0, the quotient
    part is (Q_j(D_n) w)(0), evaluated spectrally on the smooth field w.  The
    remainder only sees the low traces D_n^beta u_1(0), beta < m, which vanish in
    the continuum.  The discrete u_1 carries an O(h) spike on the jump node only;
    lifting it away would spread that error over the whole boundary layer, so the
    low traces are taken as zero unless ``low_traces`` asks for their finite
    difference values.
    """
    m = tuple_.m
    Q = _quotients(tuple_, table)
    grid = w.grid
    N_n = grid.N[-1]
    spec = _full_spectrum(w).reshape(-1, N_n)[table.index]        # (modes, N_n)
    xi_n = grid.xi[-1]
    powers = xi_n[None, :] ** np.arange(m)[:, None]                  # (m, N_n)
    vals = np.einsum("mjq,qp,mp->mjp", Q, powers, spec)              # Q_j(xi_n) w^
    # value at the node x_n = 0 (index N_n/2) of the normal inverse transform
    sign = (-1.0) ** np.fft.fftfreq(N_n, 1.0 / N_n)
    quot = (np.fft.ifft(vals * sign, axis=-1) / grid.h[-1])[..., N_n // 2]
    if not low_traces:
        return quot
    derivs = normal_derivatives_at_zero(u1, m - 1)
    tr = (derivs.reshape(m, -1) * ((-1j) ** np.arange(m))[:, None])[:, table.index].T
    if F is None:
        F = np.broadcast_to(np.eye(m), (table.size, m, m))
    return quot + np.einsum("mab,mb->ma", F, tr)


# ------------------------------------------------------------- boundary kernel

@dataclass
class BoundaryKernel:
    table: FactorTable
    nodes: np.ndarray        # (modes, J) exponents z_j in exp(i x z_j)
    weights: np.ndarray      # (modes, m, J) corrected weights, L = L~ K~^{-1}
    raw_weights: np.ndarray  # (modes, m, J)
    K_raw: np.ndarray        # (modes, m, m), K~[beta, alpha] = D^beta L~_alpha(0)
    K_inv: np.ndarray
    contour: np.ndarray      # (modes,) True where the contour fallback was used
    values: np.ndarray = None  # (modes, m, P) kernel on the half-box nodes

    @property
    def m(self):
        return self.weights.shape[1]

    def evaluate(self, x):
        """L_alpha(x) for arbitrary x >= 0, shape (modes, m, len(x))."""
        return _kernels.exp_sum(self.weights, self.nodes, np.asarray(x, dtype=float))

    def symbol_trace(self):
        """D_n^beta L_alpha(0) from the exponential sums, shape (modes, m, m) [beta, alpha]."""
        powers = self.nodes[:, None, :] ** np.arange(self.m)[None, :, None]   # (M, beta, J)
        return np.einsum("mbj,maj->mba", powers, self.weights)


def _numerators(c_plus, z):
    """N_alpha(z) = sum_{l=0}^{m-alpha-1} c_l z^{m-alpha-l-1}; z (M, P) -> (M, m, P)."""
    M, m1 = c_plus.shape
    m = m1 - 1
    out = np.zeros((M, m) + z.shape[1:], dtype=complex)
    for a in range(m):
        # coefficients c_0..c_{m-a-1}, highest power first
        out[:, a] = _kernels.horner(c_plus[:, : m - a], z)
    return out


def _min_separation(roots):
    m = roots.shape[1]
    if m < 2:
        return np.full(roots.shape[0], np.inf)
    d = np.abs(roots[:, :, None] - roots[:, None, :])
    d[:, np.arange(m), np.arange(m)] = np.inf
    return d.min(axis=(1, 2))


def build_boundary_kernel(tuple_, table, grid=None, force_contour=False):
    """Per-mode lifting kernels with symbol trace equal to the identity."""
    grid = table.grid if grid is None else grid
    rho = table.fact.rho_plus
    c = table.fact.c_plus
    M, m = rho.shape
    scale = 1.0 + np.abs(rho).max(axis=1)
    clustered = _min_separation(rho) <= CLUSTER_TOL * scale
    if force_contour:
        clustered[:] = True
    J = max(m, CONTOUR_NODES) if np.any(clustered) else m
    nodes = np.zeros((M, J), dtype=complex)
    raw = np.zeros((M, m, J), dtype=complex)

    ok = ~clustered
    if np.any(ok):
        r = rho[ok]
        diff = r[:, :, None] - r[:, None, :]
        diff[:, np.arange(m), np.arange(m)] = 1.0
        dM = np.prod(diff, axis=2)                      # M_+'(rho_j)
        nodes[ok, :m] = r
        raw[ok, :, :m] = _numerators(c[ok], r) / dM[:, None, :]

    if np.any(clustered):
        r = rho[clustered]
        center = r.mean(axis=1)
        spread = np.abs(r - center[:, None]).max(axis=1)
        # centred on the cluster so that nodes stay close to the upper half-plane
        radius = np.maximum(2 * spread, 1e-3 * (1 + np.abs(center)))
        theta = 2 * np.pi * np.arange(J) / J
        z = center[:, None] + radius[:, None] * np.exp(1j * theta)[None, :]
        dz = radius[:, None] * np.exp(1j * theta)[None, :] / J   # dz / (2 pi i) per node
        Mz = _kernels.horner(c[clustered], z)
        nodes[clustered] = z
        raw[clustered] = _numerators(c[clustered], z) * (dz / Mz)[:, None, :]
        if not force_contour:
            warnings.warn(f"{int(clustered.sum())} modes with clustered roots use contour quadrature",
                          RuntimeWarning, stacklevel=2)

    powers = nodes[:, None, :] ** np.arange(m)[None, :, None]
    K = np.einsum("mbj,maj->mba", powers, raw)
    cond = np.linalg.cond(K)
    if np.any(cond > COND_LIMIT):
        i = int(np.argmax(cond))
        raise IllConditionedTrace(
            f"raw trace matrix condition {cond[i]:.3e} at eta={table.fact.eta[i]:.6g}",
            {"eta": float(table.fact.eta[i]), "xi_prime": table.fact.xi_prime[i].tolist(),
             "cond": float(cond[i])})
    K_inv = np.linalg.inv(K)
    # L_alpha = sum_gamma L~_gamma (K^{-1})_{gamma alpha}
    weights = np.einsum("mga,mgj->maj", K_inv, raw)
    kern = BoundaryKernel(table, nodes, weights, raw, K, K_inv, clustered)
    kern.values = kern.evaluate(grid.x_half)
    return kern


# --------------------------------------------------------- lifting and traces

def _tangential_forward(field_):
    g = field_.grid
    axes = range(g.n) if not field_.half else range(g.n - 1)
    return _forward_array(field_.data, g, axes)


def _boundary_spectra(g_list, table):
    """Stack tangential spectra of boundary fields over retained modes: (modes, m)."""
    rows = []
    for gj in g_list:
        if gj.state != "physical":
            raise StateMismatch("boundary data must be physical")
        require_osc(gj, "boundary datum")
        rows.append(_forward_array(gj.data, gj.grid, range(gj.grid.n)).ravel()[table.index])
    return np.stack(rows, axis=-1)


def _lift_spectral(d_hat, kernel):
    """Half-box field from per-mode Dirichlet data d_hat (modes, m)."""
    table = kernel.table
    grid = table.grid
    P = grid.N[-1] // 2
    flat = np.zeros((int(np.prod(table.tangential_shape)), P), dtype=complex)
    flat[table.index] = np.einsum("map,ma->mp", kernel.values, d_hat)
    spec = flat.reshape(table.tangential_shape + (P,))
    return TPField(grid, _inverse_array(spec, grid, range(grid.n - 1)), half=True)


def lift_dirichlet(g, kernel):
    """Solution of the homogeneous equation with symbol traces D_n^j u(0) = g_j."""
    if len(g) != kernel.m:
        raise ValueError(f"expected {kernel.m} boundary fields, got {len(g)}")
    return _lift_spectral(_boundary_spectra(g, kernel.table), kernel)


def normal_derivatives_at_zero(u, max_order, accuracy=6):
    """Tangential spectrum of ∂_n^q u at x_n = 0, q = 0..max_order, shape (q, N_t, N'...).

    One-sided finite differences whose weights come from a Vandermonde moment solve.
    """
    if not u.half or u.state != "physical":
        raise StateMismatch("boundary_values expects a physical half field")
    spec = _forward_array(u.data, u.grid, range(u.grid.n - 1))
    h = u.grid.h[-1]
    out = []
    for q in range(max_order + 1):
        width = q + accuracy
        w = fd_weights(np.arange(width), q) / h ** q
        out.append(spec[..., :width] @ w)
    return np.stack(out)


def _boundary_field(grid, spec_flat):
    bgrid = grid.boundary()
    shape = (grid.N_t,) + grid.N[:-1]
    return TPField(bgrid, _inverse_array(spec_flat.reshape(shape), bgrid, range(bgrid.n)))


def _apply_boundary_ops(tuple_, grid, derivs):
    """B_j u(0) in tangential spectral form, flattened: list of (N_t*prod N',) arrays."""
    k, xp, _ = _tangential_modes(grid)
    flat = derivs.reshape(derivs.shape[0], -1)
    qs = np.arange(flat.shape[0])
    dtrace = flat * ((-1j) ** qs)[:, None]
    out = []
    for b in tuple_.boundary:
        coeffs = z_coeffs(principal_part(b), xp)          # (modes, order+1) ascending
        out.append(np.einsum("mq,qm->m", coeffs, dtrace[: coeffs.shape[1]]))
    return out


def boundary_values(u, tuple_, traces=False):
    """B_j u at x_n = 0 as boundary fields (and optionally the symbol traces tr_m^D u)."""
    m = tuple_.m
    max_q = max([b.order for b in tuple_.boundary] + [m - 1])
    derivs = normal_derivatives_at_zero(u, max_q)
    vals = [_boundary_field(u.grid, s) for s in _apply_boundary_ops(tuple_, u.grid, derivs)]
    if not traces:
        return vals
    tr = [_boundary_field(u.grid, derivs[q].ravel() * (-1j) ** q) for q in range(m)]
    return vals, tr


def dirichlet_tuple(interior):
    """Operator tuple with B_j = D_n^{j-1}, j = 1..m."""
    from .symbols import monomial
    n, m = interior.n, interior.order // 2
    return OperatorTuple(interior, tuple(monomial(n, (0,) * (n - 1) + (j,)) for j in range(m)))


def solve_general(prob, table=None, kernel=None):
    """u = u_1 + L F^{-1}(g - B u_1) with u_1 the zero-trace solution."""
    tuple_, grid = prob.tuple_, prob.grid
    if prob.bc_kind == "dirichlet":
        tuple_ = dirichlet_tuple(tuple_.interior)
    table = build_factor_table(tuple_, grid) if table is None else table
    kernel = build_boundary_kernel(tuple_, table, grid) if kernel is None else kernel
    u1, w = _zero_trace_parts(prob.f, table)
    if prob.bc_kind == "dirichlet":
        d = _boundary_spectra(prob.g, table) - _boundary_ops_zero_trace(tuple_, table, u1, w)
    else:
        cm = char_matrix_batch(tuple_, table.fact, strict=False)
        singular = cm.det_ratio <= 1e-8
        if np.any(singular):
            i = int(np.nonzero(singular)[0][0])
            raise SingularCharMatrix(
                f"characteristic matrix singular at eta={table.fact.eta[i]:.6g}, "
                f"xi'={table.fact.xi_prime[i].tolist()}",
                {"eta": float(table.fact.eta[i]), "xi_prime": table.fact.xi_prime[i].tolist()})
        h = _boundary_spectra(prob.g, table) - _boundary_ops_zero_trace(tuple_, table, u1, w, cm.F)
        d = np.einsum("mab,mb->ma", cm.F_inv, h)
    return u1 + _lift_spectral(d, kernel)


# ------------------------------------------------------------------ estimates

def estimate_ratio_hs(u, f, g, p=2, spec=None, m=1):
    """||u||_{W^{1,2m}_p} / (||f||_p + sum_j ||g_j||_{trace, kappa_j})."""
    if spec is None:
        spec = TraceSpaceSpec(m, p, tuple(range(len(g))))
    den = lp_norm(f, p) + sum(trace_norm(gj, kj, p, spec.m) for gj, kj in zip(g, spec.kappa))
    if den == 0:
        return np.inf
    return sobolev_norm(u, p, spec.m) / den


def bootstrap_chain(u, m):
    """||op[|(k, xi')|^j] u||_{W^{1,2m}_2} for j = 0..m (tangential regularity chain)."""
    return [sobolev_norm(apply_multiplier(u, parabolic_multiplier(j, m), osc_only=True), 2, m)
            if j else sobolev_norm(u, 2, m) for j in range(m + 1)]


def apply_char_matrix(d, tuple_, table, inverse_=False):
    """op[F] d (or op[F^{-1}] d) for m boundary fields d, per retained mode."""
    cm = char_matrix_batch(tuple_, table.fact, strict=True)
    mat = cm.F_inv if inverse_ else cm.F
    out = np.einsum("mab,mb->ma", mat, _boundary_spectra(d, table))
    n_tan = int(np.prod(table.tangential_shape))
    fields = []
    for j in range(out.shape[1]):
        flat = np.zeros(n_tan, dtype=complex)
        flat[table.index] = out[:, j]
        fields.append(_boundary_field(table.grid, flat))
    return fields
