"""Independent reference computations.

``ode_oracle`` solves the per-mode two-point problem on [0, X_max] with a
dense finite-difference collocation (weights from Fornberg's recursion), so it
shares nothing with the half-space solver except symbol evaluation.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import SingularSystem
from .grid import TPField, lp_norm, project_osc
from .symbols import principal_part, split_roots, z_coeffs, laplacian_power

ODE_ORDER = 6
SINGULAR_COND = 1e13


# ------------------------------------------------------------- ODE collocation

def fornberg_weights(x0, nodes, max_deriv):
    """Weights c[d, j] approximating the d-th derivative at x0 from f(nodes[j])."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((max_deriv + 1, n))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, max_deriv)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for d in range(mn, 0, -1):
                    c[d, i] = c1 * (d * c[d - 1, i - 1] - c5 * c[d, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for d in range(mn, 0, -1):
                c[d, j] = (c4 * c[d, j] - d * c[d - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@dataclass
class ModeODEProblem:
    k: float
    xi_prime: tuple
    tuple_: object
    rhs: object = None        # callable of x_n, or samples on the oracle nodes, or None
    bc: tuple = ()            # m boundary values B_j u(0)
    X_max: float = 32.0
    N_ode: int = 2048
    bc_kind: str = "general"  # "dirichlet" ignores tuple_.boundary and uses D_n^j

    @property
    def nodes(self):
        return np.linspace(0.0, self.X_max, self.N_ode + 1)


def _deriv_row(x, i, q, width):
    """Stencil (start, weights) for the q-th derivative at node i, shifted inside [0, N]."""
    N = len(x) - 1
    width = min(width, N + 1)
    start = min(max(i - width // 2, 0), N + 1 - width)
    w = fornberg_weights(x[i], x[start:start + width], q)[q]
    return start, w


def ode_oracle(prob):
    """û(x_n) on the oracle nodes for ik u + A^H(xi', D_n) u = f̂ with the given boundary values."""
    x = prob.nodes
    N = len(x) - 1
    xp = np.asarray(prob.xi_prime, dtype=float).reshape(1, -1)
    interior = principal_part(prob.tuple_.interior)
    m = interior.order // 2
    p = z_coeffs(interior, xp)[0].copy()            # ascending in D_n
    p[0] += 1j * prob.k
    if prob.bc_kind == "dirichlet":
        bops = [np.eye(m)[j][: j + 1] for j in range(m)]
    else:
        bops = [z_coeffs(principal_part(b), xp)[0] for b in prob.tuple_.boundary]

    rows, cols, vals = [], [], []
    b = np.zeros(N + 1, dtype=complex)
    if prob.rhs is None:
        f = np.zeros(N + 1, dtype=complex)
    elif callable(prob.rhs):
        f = np.asarray(prob.rhs(x), dtype=complex)
    else:
        f = np.asarray(prob.rhs, dtype=complex)

    def add_operator(row, node, coeffs):
        for q, cq in enumerate(coeffs):
            if cq == 0:
                continue
            width = 2 * ((q + 1) // 2 + 2) + 1 if q else 1
            width = max(width, q + ODE_ORDER)
            start, w = _deriv_row(x, node, q, width)
            rows.append(np.full(len(w), row))
            cols.append(np.arange(start, start + len(w)))
            vals.append(cq * (-1j) ** q * w)

    # boundary conditions at 0
    for j, coeffs in enumerate(bops):
        add_operator(j, 0, coeffs)
        b[j] = prob.bc[j] if len(prob.bc) else 0.0
    # interior collocation
    for r, i in enumerate(range(m, N - m + 1)):
        add_operator(m + r, i, p)
        b[m + r] = f[i]
    # clamped far end: D^q u(X_max) = 0, q < m
    for q in range(m):
        e = np.zeros(m + 1)
        e[q] = 1.0
        add_operator(N + 1 - m + q, N, e[: q + 1])
    # duplicate (row, col) entries are summed on conversion
    A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N + 1, N + 1)).tocsc()
    witness = {"k": float(prob.k), "xi_prime": [float(v) for v in np.ravel(prob.xi_prime)]}
    try:
        lu = splinalg.splu(A)
    except RuntimeError as exc:
        raise SingularSystem(f"mode ODE is singular at k={prob.k}, xi'={witness['xi_prime']}",
                             witness) from exc
    inv_op = splinalg.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, "H"),
                                     dtype=complex)
    cond = splinalg.norm(A, 1) * splinalg.onenormest(inv_op)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        witness["cond"] = float(cond)
        raise SingularSystem(f"mode ODE is singular at k={prob.k}, xi'={witness['xi_prime']}",
                             witness)
    return lu.solve(b)


def analytic_heat_halfspace(k, xi_prime, g0, x):
    """g0 * exp(i rho_+ x) with rho_+ the upper root of ik + |xi'|^2 + z^2."""
    xi_prime = np.atleast_1d(np.asarray(xi_prime, dtype=float))
    heat = laplacian_power(len(xi_prime) + 1, 1)
    rho, _, _ = split_roots(heat, k, xi_prime)
    return g0 * np.exp(1j * rho[0] * np.asarray(x, dtype=float))


# ------------------------------------------------------------ mode-list data

@dataclass(frozen=True)
class ModeSpec:
    """One data term amp * exp(i k t + i xi . x) * profile.

    For half-space right-hand sides ``xi`` holds the tangential frequencies and
    the normal profile is a Gaussian exp(-((x_n - center)/width)^2); whole-space
    terms are plane waves, optionally with the same Gaussian envelope in every axis.
    """
    k: float
    xi: tuple = ()
    amplitude: complex = 1.0
    center: float = None
    width: float = 1.0

    def profile(self, x):
        if self.center is None:
            return np.ones_like(np.asarray(x, dtype=float))
        return np.exp(-((np.asarray(x, dtype=float) - self.center) / self.width) ** 2)


def field_from_modes(grid, modes, half=False):
    """Sample a mode list on the (half) grid; half fields carry the normal profile."""
    xs = list(grid.x)
    if half:
        xs[-1] = grid.x_half
    mesh = np.meshgrid(grid.t, *xs, indexing="ij")
    out = np.zeros(mesh[0].shape, dtype=complex)
    for md in modes:
        xi = list(md.xi)
        phase = 1j * md.k * mesh[0]
        if half:
            for q, y in zip(xi, mesh[1:-1]):
                phase = phase + 1j * q * y
            out += md.amplitude * np.exp(phase) * md.profile(mesh[-1])
        else:
            env = 1.0
            for q, y in zip(xi, mesh[1:]):
                phase = phase + 1j * q * y
                if md.center is not None:
                    env = env * md.profile(y)
            out += md.amplitude * np.exp(phase) * env
    return TPField(grid, out, half=half)


def boundary_from_modes(grid, modes):
    """Boundary field sum amp * exp(i k t + i xi' . x') on grid.boundary()."""
    return field_from_modes(grid.boundary(), modes)


def random_modes(rng, n_axes, count, k_max, p_max, T, L, center=None, width=1.0):
    """Random low modes in physical units (independent of the node counts)."""
    out = []
    for _ in range(count):
        q = int(rng.integers(1, k_max + 1)) * (1 if rng.random() < 0.5 else -1)
        xi = tuple(float(np.pi / L[i] * rng.integers(-p_max, p_max + 1)) for i in range(n_axes))
        amp = complex(rng.normal(), rng.normal())
        out.append(ModeSpec(2 * np.pi / T * q, xi, amp, center, width))
    return out


def random_band_limited(grid, rng, count=6, k_max=3, p_max=4):
    """Purely oscillatory band-limited field made of on-grid plane waves."""
    return field_from_modes(grid, random_modes(rng, grid.n, count, k_max, p_max, grid.T, grid.L))


# ---------------------------------------------------------- oracle comparison

def _tangential_index(grid, k, xi_prime):
    q = int(round(k * grid.T / (2 * np.pi)))
    idx = [q % grid.N_t]
    for i, v in enumerate(xi_prime):
        p = int(round(v * grid.L[i] / np.pi))
        idx.append(p % grid.N[i])
    return tuple(idx)


def oracle_modes(tuple_, grid, f_modes, g_modes, bc_kind="general", X_max=None, N_ode=2048):
    """Per-mode oracle solutions on the half-box nodes, keyed by tangential index."""
    groups = {}
    for md in f_modes:
        groups.setdefault((md.k, tuple(md.xi)), ([], {}))[0].append(md)
    for j, gm in enumerate(g_modes):
        for md in gm:
            bcs = groups.setdefault((md.k, tuple(md.xi)), ([], {}))[1]
            bcs[j] = bcs.get(j, 0) + md.amplitude
    m = tuple_.m
    h = grid.h[-1]
    if X_max is None:
        X_max = 2 * grid.L[-1]
    step = max(int(round(h / (X_max / N_ode))), 1)
    N_ode = int(round(X_max / h)) * step
    out = {}
    for (k, xp), (fm, gm) in groups.items():
        rhs = (lambda x, fm=fm: sum(md.amplitude * md.profile(x) for md in fm)) if fm else None
        bc = tuple(gm.get(j, 0.0) for j in range(m))
        prob = ModeODEProblem(k, xp, tuple_, rhs, bc, X_max, N_ode, bc_kind)
        sol = ode_oracle(prob)
        out[_tangential_index(grid, k, xp)] = sol[::step][: grid.N[-1] // 2]
    return out


def oracle_disagreement(u, tuple_, f_modes, g_modes, bc_kind="general", **kw):
    """Relative L2 distance between a half-box solution and the per-mode oracle."""
    from .grid import _forward_array
    grid = u.grid
    spec = _forward_array(u.data, grid, range(grid.n - 1))
    ref = oracle_modes(tuple_, grid, f_modes, g_modes, bc_kind, **kw)
    ref_full = np.zeros_like(spec)
    # a plane wave in x' has tangential coefficient prod(2 L_i)
    weight = float(np.prod([2 * L for L in grid.L[:-1]]))
    for idx, sol in ref.items():
        ref_full[idx] = weight * sol
    den = np.sqrt(np.sum(np.abs(ref_full) ** 2))
    return float(np.sqrt(np.sum(np.abs(spec - ref_full) ** 2)) / den)


# ------------------------------------------------------------------ residuals

def _interior_operator_half(u, sym):
    """(∂_t + A(D)) u on a half field: spectral in (t, x'), finite differences in x_n."""
    from .grid import _forward_array, _inverse_array, fd_derivative
    grid = u.grid
    spec = _forward_array(u.data, grid, range(grid.n - 1))
    k = grid.k.reshape((-1,) + (1,) * grid.n)
    out = 1j * k * spec
    xi = [grid.xi[i].reshape((1,) + tuple(-1 if j == i else 1 for j in range(grid.n)))
          for i in range(grid.n - 1)]
    cache = {}
    for alpha, c in sym.coeffs.items():
        q = alpha[-1]
        if q not in cache:
            cache[q] = fd_derivative(spec, grid.h[-1], q) if q else spec
        term = c * (-1j) ** q * cache[q]
        for ax, a in enumerate(alpha[:-1]):
            if a:
                term = term * xi[ax] ** a
        out = out + term
    return TPField(grid, _inverse_array(out, grid, range(grid.n - 1)), half=True)


def manufactured_residual(u, f, op, grid=None, domain="whole"):
    """Relative PDE residual; half space uses the slab L_n/8 <= x_n <= 7 L_n/8."""
    from .wholespace import apply_operator
    sym = op.interior if hasattr(op, "interior") else op
    if domain == "whole":
        fo = project_osc(f)
        den = lp_norm(fo)
        r = lp_norm(apply_operator(sym, u) - fo)
        return r / den if den > 0 else r
    Au = _interior_operator_half(u, principal_part(sym))
    xn = u.grid.x_half
    L = u.grid.L[-1]
    slab = (xn >= L / 8) & (xn <= 7 * L / 8)
    diff = np.linalg.norm((Au.data - f.data)[..., slab])
    den = np.linalg.norm(f.data[..., slab])
    if den == 0:
        den = np.linalg.norm(f.data)
    return float(diff / den) if den > 0 else float(diff)


# --------------------------------------------------------- convergence study

@dataclass
class ConvergenceTable:
    resolutions: list
    errors: list
    orders: list

    def rows(self):
        out = []
        for i, (n, e) in enumerate(zip(self.resolutions, self.errors)):
            out.append({"resolution": n, "error": e,
                        "order": self.orders[i - 1] if i else float("nan")})
        return out


def convergence_study(family, resolutions):
    """Errors of ``family(resolution)`` and empirical orders log2(e_i / e_{i+1})."""
    resolutions = list(resolutions)
    if len(resolutions) < 3:
        raise ValueError("a convergence study needs at least three resolutions")
    errors = [float(family(r)) for r in resolutions]
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = [float(np.log2(a / b)) for a, b in zip(errors[:-1], errors[1:])]
    return ConvergenceTable(resolutions, errors, orders)


def halfspace_heat_family(bc_kind="dirichlet", n=1, N_t=16, L_n=16.0):
    """Heat half-space problem with Gaussian data; maps N_n to the oracle disagreement."""
    from .grid import make_grid
    from .halfspace import HalfSpaceProblem, dirichlet_tuple, solve_general
    from .symbols import OperatorTuple, monomial
    heat = laplacian_power(n, 1)
    tup = dirichlet_tuple(heat) if bc_kind == "dirichlet" else \
        OperatorTuple(heat, (monomial(n, (0,) * (n - 1) + (1,)),))
    f_modes = [ModeSpec(1.0, (0.0,) * (n - 1), 1.0, L_n / 2, 1.0),
               ModeSpec(-2.0, (0.0,) * (n - 1), 0.5 - 0.3j, L_n / 2, 1.0)]
    g_modes = [[ModeSpec(1.0, (0.0,) * (n - 1), 0.7), ModeSpec(3.0, (0.0,) * (n - 1), -0.4j)]]

    def family(N_n):
        axes = [(8.0, 16)] * (n - 1) + [(L_n, N_n)]
        grid = make_grid(2 * np.pi, n, N_t, axes, n - 1)
        f = field_from_modes(grid, f_modes, half=True)
        g = [boundary_from_modes(grid, gm) for gm in g_modes]
        u = solve_general(HalfSpaceProblem(tup, grid, f, g, bc_kind))
        return oracle_disagreement(u, tup, f_modes, g_modes, bc_kind)
    return family


# -------------------------------------------------------------- estimate sweep

@dataclass
class SweepReport:
    ensemble: int
    seed: int
    ratios: list
    ratios_refined: list
    supremum: float
    supremum_refined: float
    drift: float
    resolutions: list = field(default_factory=list)
    analytic_supremum: float = None

    def to_dict(self):
        return {"ensemble": self.ensemble, "seed": self.seed,
                "resolutions": self.resolutions, "supremum": self.supremum,
                "supremum_refined": self.supremum_refined, "drift": self.drift,
                "analytic_supremum": self.analytic_supremum,
                "ratios": self.ratios, "ratios_refined": self.ratios_refined}

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _ws_ratios(sym, grid, samples, p):
    from .wholespace import WholeSpaceProblem, estimate_ratio_ws, solve_wholespace
    m = sym.order // 2
    out = []
    for modes in samples:
        f = field_from_modes(grid, modes)
        u = solve_wholespace(WholeSpaceProblem(sym, grid, f))
        out.append(float(estimate_ratio_ws(u, f, 2 * m, p, m)))
    return out


def _hs_ratios(tup, grid, samples, p, bc_kind):
    from .grid import TraceSpaceSpec
    from .halfspace import (HalfSpaceProblem, build_boundary_kernel, build_factor_table,
                            dirichlet_tuple, estimate_ratio_hs, solve_general)
    work = dirichlet_tuple(tup.interior) if bc_kind == "dirichlet" else tup
    table = build_factor_table(work, grid)
    kernel = build_boundary_kernel(work, table, grid)
    spec = TraceSpaceSpec(work.m, p, tuple(work.boundary_orders))
    out = []
    for f_modes, g_modes in samples:
        f = field_from_modes(grid, f_modes, half=True)
        g = [boundary_from_modes(grid, gm) for gm in g_modes]
        u = solve_general(HalfSpaceProblem(work, grid, f, g, bc_kind), table, kernel)
        out.append(float(estimate_ratio_hs(u, f, g, p, spec)))
    return out


def estimate_sweep(op, grid, ensemble=100, p=2, seed=0, domain="whole", bc_kind="dirichlet",
                   k_max=3, p_max=3, refine_axes=None):
    """Empirical supremum of the estimate ratio over random data at two resolutions."""
    rng = np.random.default_rng(seed)
    n = grid.n
    if domain == "whole":
        samples = [random_modes(rng, n, int(rng.integers(1, 5)), k_max, p_max, grid.T, grid.L)
                   for _ in range(ensemble)]
        run = lambda g: _ws_ratios(op, g, samples, p)  # noqa: E731
    else:
        L_n = grid.L[-1]
        samples = []
        for _ in range(ensemble):
            f_modes = random_modes(rng, n - 1, int(rng.integers(1, 4)), k_max, p_max,
                                   grid.T, grid.L[:-1], center=L_n / 2, width=1.0)
            g_modes = [random_modes(rng, n - 1, int(rng.integers(1, 3)), k_max, p_max,
                                    grid.T, grid.L[:-1]) for _ in range(op.m)]
            samples.append((f_modes, g_modes))
        run = lambda g: _hs_ratios(op, g, samples, p, bc_kind)  # noqa: E731
    fine = grid.refined(2, refine_axes)
    r1, r2 = run(grid), run(fine)
    s1, s2 = max(r1), max(r2)
    return SweepReport(ensemble, seed, r1, r2, s1, s2, abs(s2 - s1) / s1,
                       [list(grid.N), list(fine.N)])


def single_mode_sweep(sym, grid, p=2):
    """Estimate ratio for every retained single mode, with the closed-form supremum."""
    from .grid import nyquist_mask
    m = sym.order // 2
    keep = ~nyquist_mask(grid, grid.n)
    keep[0] = False
    modes, analytic = [], []
    for idx in np.argwhere(keep):
        k = float(grid.k[idx[0]])
        xi = tuple(float(grid.xi[i][idx[i + 1]]) for i in range(grid.n))
        modes.append([ModeSpec(k, xi, 1.0)])
        rho = float(np.sum(np.square(xi)) ** (2 * m) + k * k) ** (1 / (4 * m))
        M = abs(1j * k + complex(sym(np.asarray(xi))))
        analytic.append(rho ** (2 * m) / (M + rho ** (2 * m - 1)))
    ratios = _ws_ratios(sym, grid, modes, p)
    return ratios, analytic
