"""Time-periodic problems on the whole space: direct inversion of ik + A(xi)."""

from dataclasses import dataclass

import numpy as np

from .errors import SymbolVanishes
from .grid import (GroupGrid, TPField, apply_multiplier, bessel_norm, forward, inverse,
                   lp_norm, nyquist_mask, project_osc, require_osc)
from .symbols import DifferentialSymbol, eval_symbol, principal_part

INVERT_TOL = 1e-12


@dataclass
class WholeSpaceProblem:
    op: DifferentialSymbol
    grid: GroupGrid
    f: TPField


def _symbol_on_grid(op, k, xi):
    """ik + A(xi) on broadcast frequency arrays."""
    shape = np.broadcast_shapes(k.shape, *(q.shape for q in xi))
    pts = np.stack([np.broadcast_to(q, shape).ravel() for q in xi], axis=-1)
    A = eval_symbol(op, pts).reshape(shape)
    return 1j * k + A


def full_multiplier(op):
    """The symbol M(k, xi) = ik + A(xi) as a multiplier callable."""
    return lambda k, xi: _symbol_on_grid(op, k, xi)


def apply_operator(op, u):
    """op[M] u = (∂_t + A(D)) u, computed spectrally."""
    return apply_multiplier(u, full_multiplier(op))


def _on_agmon_ray(op, k, xi, tol=1e-6):
    """Does A^H(xi) lie on the ray through -ik (the ray the vanishing mode points at)?"""
    val = complex(eval_symbol(principal_part(op), np.asarray(xi, dtype=float)))
    if abs(val) == 0:
        return True
    return bool(abs(np.angle(val * np.exp(1j * np.sign(k) * np.pi / 2))) < tol)


def solve_wholespace(prob):
    """u with û = f̂ / (ik + A(xi)) on every retained k != 0 mode."""
    f, op, grid = prob.f, prob.op, prob.grid
    require_osc(f, "right-hand side")
    k = grid.mesh_k()
    xi = grid.mesh_xi()
    M = _symbol_on_grid(op, k, xi)
    xi_sq = sum(q ** 2 for q in xi)
    # tolerance 1e-12 (1 + |(k, xi)|^{2m}) with the parabolic length of order m
    m = op.order // 2
    scale = 1.0 + np.sqrt(np.abs(k) ** 2 + xi_sq ** (2 * m))
    live = ~nyquist_mask(grid, grid.n) & (k != 0)
    bad = live & (np.abs(M) <= INVERT_TOL * scale)
    if np.any(bad):
        idx = tuple(np.argwhere(bad)[0])
        kw = float(grid.k[idx[0]])
        xw = [float(grid.xi[i][idx[i + 1]]) for i in range(grid.n)]
        raise SymbolVanishes(
            f"ik + A(xi) vanishes at k={kw}, xi={xw}",
            {"k": kw, "xi": xw, "agmon_violated": _on_agmon_ray(op, kw, xw)})
    spec = forward(f) if f.state == "physical" else f
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(live, spec.data / np.where(live, M, 1.0), 0.0)
    return inverse(spec.copy(out))


def residual_wholespace(u, f, op):
    """||op[M] u - P⊥ f||_2 / ||P⊥ f||_2."""
    f = project_osc(f)
    denom = lp_norm(f)
    r = lp_norm(apply_operator(op, u) - f)
    return r / denom if denom > 0 else r


def estimate_ratio_ws(u, f, s, p=2, m=1, op=None):
    """||u||_{H^s} / (||op[M] u||_{H^{s-2m}} + ||u||_{H^{s-1}}).

    ``f`` stands in for op[M] u; pass ``op`` to recompute it from ``u`` instead.
    """
    Mu = project_osc(apply_operator(op, u)) if op is not None else project_osc(f)
    if op is not None:
        m = op.order // 2
    num = bessel_norm(u, s, p, m)
    den = bessel_norm(Mu, s - 2 * m, p, m) + bessel_norm(u, s - 1, p, m)
    if den == 0:
        return np.inf
    return num / den
