"""Acceptance suite: one test per criterion, one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or ``python tests/test_acceptance.py``.
"""
import os
import sys
import time
import warnings

import numpy as np
import pytest

from tppar.cli import main as cli_main
from tppar.grid import TPField, lp_norm, make_grid, project_osc
from tppar.halfspace import (apply_char_matrix, apply_factor_inverse, boundary_values,
                             build_boundary_kernel, build_factor_table, dirichlet_tuple,
                             lift_dirichlet)
from tppar.io import read_field, write_field
from tppar.oracles import (ModeSpec, boundary_from_modes, estimate_sweep, fornberg_weights,
                           halfspace_heat_family, random_band_limited, single_mode_sweep)
from tppar.symbols import (OperatorTuple, char_matrix_batch, check_agmon_ray, check_all,
                           eval_symbol, factorize, laplacian_power, monomial, split_roots)
from tppar.wholespace import WholeSpaceProblem, apply_operator, solve_wholespace

TWO_PI = 2 * np.pi
SPECS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "examples_specs")
RESULTS = {}

pytestmark = pytest.mark.filterwarnings("ignore::tppar.halfspace.TruncationWarning")


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def heat(n):
    return laplacian_power(n, 1)


def biharm(n):
    return laplacian_power(n, 2)


def clamped(n):
    e = (0,) * (n - 1)
    return OperatorTuple(biharm(n), (monomial(n, e + (0,)), monomial(n, e + (1,))))


def neumann_heat(n):
    return OperatorTuple(heat(n), (monomial(n, (0,) * (n - 1) + (1,)),))


def ws_round_trip(ops, count, seed):
    """Worst relative L2 error of solve(op[M] u0) against u0 over random fields."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(count):
        op = ops[i % len(ops)]
        n = op.n
        g = make_grid(TWO_PI, n, 16, [(np.pi, 64)] * n)
        u0 = random_band_limited(g, rng)
        # A(xi) at k = 0 amplifies the roundoff mean of u0; strip it
        f = project_osc(apply_operator(op, u0))
        u = solve_wholespace(WholeSpaceProblem(op, g, f))
        worst = max(worst, lp_norm(u - u0) / lp_norm(u0))
    return worst


# ---------------------------------------------------------------------------- 1

def test_criterion_1_wholespace_exactness():
    ops = [heat(1), biharm(1), heat(2), biharm(2)]
    ws_round_trip(ops, 4, 99)          # warm up FFT plans and imports
    t0 = time.perf_counter()
    err = ws_round_trip(ops, 20, 1)
    dt = time.perf_counter() - t0
    report(1, err <= 1e-12 and dt <= 5.0, f"max rel L2 error {err:.2e} (<= 1e-12), {dt:.2f} s (<= 5 s)")


# ---------------------------------------------------------------------------- 2

def test_criterion_2_backward_heat():
    bw = [-heat(1), -heat(2)]
    rays = all(check_agmon_ray(op, th).ok for op in bw for th in (np.pi / 2, -np.pi / 2))
    err = ws_round_trip(bw, 20, 2)
    report(2, rays and err <= 1e-12, f"Agmon on +-pi/2: {rays}, max rel L2 error {err:.2e}")


# ---------------------------------------------------------------------------- 3

def _match(a, b):
    a = np.sort_complex(np.asarray(a))
    b = np.sort_complex(np.asarray(b))
    return float(np.max(np.abs(a - b)))


def test_criterion_3_root_splits():
    worst = 0.0
    modes = 0
    splits_ok = True
    g = make_grid(TWO_PI, 2, 16, [(4.0, 16), (16.0, 64)], 1)
    for op in (heat(2), -heat(2), biharm(2)):
        t = build_factor_table(dirichlet_tuple(op), g)
        m = op.order // 2
        splits_ok &= t.fact.rho_plus.shape == (t.size, m)
        splits_ok &= bool(np.all(t.fact.rho_plus.imag > 0) and np.all(t.fact.rho_minus.imag < 0))
        modes += t.size
    cases = [
        (heat(1), [np.exp(3j * np.pi / 4)], [np.exp(-1j * np.pi / 4)]),
        (-heat(1), [np.exp(1j * np.pi / 4)], [-np.exp(1j * np.pi / 4)]),
        (biharm(1), np.exp(1j * np.pi * np.array([3, 7]) / 8),
         np.exp(-1j * np.pi * np.array([1, 5]) / 8)),
    ]
    for op, plus, minus in cases:
        p, mi, _ = split_roots(op, 1.0)
        worst = max(worst, _match(p, plus), _match(mi, minus))
    report(3, splits_ok and worst <= 1e-10,
           f"m/m split at all {modes} retained modes: {splits_ok}; closed forms max err {worst:.1e}")


# ---------------------------------------------------------------------------- 4

def test_criterion_4_factor_identity():
    rng = np.random.default_rng(4)
    worst = 0.0
    count = 0
    g = make_grid(TWO_PI, 2, 16, [(4.0, 16), (16.0, 64)], 1)
    for op in (heat(2), -heat(2), biharm(2), laplacian_power(2, 3)):
        fact = build_factor_table(dirichlet_tuple(op), g).fact
        z = rng.normal(size=(len(fact), 10)) + 1j * rng.normal(size=(len(fact), 10))
        lhs = fact.leading * fact.m_plus(z) * fact.m_minus(z)
        xp = np.broadcast_to(fact.xi_prime, (10,) + fact.xi_prime.shape).transpose(1, 0, 2)
        rhs = 1j * fact.eta[:, None] + eval_symbol(op, np.concatenate([xp, z[..., None]], -1))
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))
        count += len(fact)
    report(4, worst <= 1e-10, f"max rel error {worst:.1e} over {count} modes x 10 points")


# ---------------------------------------------------------------------------- 5

def test_criterion_5_homogeneity():
    rng = np.random.default_rng(5)
    eta = rng.uniform(0.2, 5, 100) * rng.choice([-1, 1], 100)
    xp = rng.uniform(-3, 3, (100, 1))
    worst = 0.0
    for tup in (dirichlet_tuple(heat(2)), neumann_heat(2), clamped(2), dirichlet_tuple(biharm(2))):
        m = tup.m
        f1 = factorize(tup.interior, eta, xp)
        cm1 = char_matrix_batch(tup, f1)
        mj = np.array(tup.boundary_orders)[:, None]
        beta = np.arange(m)[None, :]
        for lam in (2.0, 0.5):
            f2 = factorize(tup.interior, lam ** (2 * m) * eta, lam * xp)
            cm2 = char_matrix_batch(tup, f2)
            checks = [
                (np.sort_complex(f2.rho_plus), lam * np.sort_complex(f1.rho_plus)),
                (f2.c_plus, f1.c_plus * lam ** np.arange(m + 1)),
                (f2.c_minus, f1.c_minus * lam ** np.arange(m + 1)),
                (cm2.F, cm1.F * lam ** (mj - beta)),
                (cm2.F_inv, cm1.F_inv * lam ** (beta.T - mj.T)),
            ]
            for a, b in checks:
                worst = max(worst, float(np.max(np.abs(a - b) / (1 + np.abs(b)))))
    report(5, worst <= 1e-8, f"max rel error {worst:.1e} (roots, c+-, F, F^-1; lambda = 2, 1/2)")


# ---------------------------------------------------------------------------- 6

def _leakage(N_n, side="plus"):
    L_n = 32.0
    g = make_grid(TWO_PI, 1, 16, [(L_n, N_n)], 0)
    table = build_factor_table(dirichlet_tuple(heat(1)), g)
    c, r = L_n / 4, L_n / 8
    x = g.x[0] if side == "plus" else -g.x[0]
    s = (x - c) / r
    bump = np.where(np.abs(s) < 1, (1 - s ** 2) ** 2, 0.0)
    v = TPField(g, (np.exp(2j * g.t) + 0.5 * np.exp(-3j * g.t))[:, None] * bump[None, :])
    w = apply_factor_inverse(v, table, side).data
    outside = g.x[0] < 0 if side == "plus" else g.x[0] > 0
    return float(np.linalg.norm(w[:, outside]) / np.linalg.norm(w))


def test_criterion_6_paley_wiener():
    leak = [_leakage(N) for N in (256, 512, 1024)]
    mirror = [_leakage(N, "minus") for N in (256, 512)]
    ok = leak[0] <= 1e-6 and leak[0] > leak[1] > leak[2] and mirror[0] > mirror[1]
    report(6, ok, "leakage of A+^-1 v into x_n<0: " + ", ".join(f"{e:.1e}" for e in leak)
           + f" at N_n=256/512/1024 (A-^-1 mirror {mirror[0]:.1e} -> {mirror[1]:.1e})")


# ---------------------------------------------------------------------------- 7

def _fd_symbol_trace(kernel, m, h=1e-2, width=12):
    """D^beta L_alpha(0) from off-grid kernel samples and one-sided Fornberg weights."""
    xs = h * np.arange(width)
    vals = kernel.evaluate(xs)                               # (modes, m, width)
    w = fornberg_weights(0.0, xs, m - 1)                     # (m, width)
    return np.einsum("bp,map->mba", w * ((-1j) ** np.arange(m))[:, None], vals)


def _random_boundary(g, rng, count=5):
    nb = g.n - 1
    return boundary_from_modes(g, [ModeSpec(TWO_PI / g.T * int(rng.choice([-3, -2, -1, 1, 2, 3])),
                                            tuple(np.pi / g.L[i] * rng.integers(-3, 4)
                                                  for i in range(nb)),
                                            complex(rng.normal(), rng.normal()))
                                   for _ in range(count)])


def test_criterion_7_trace_contracts():
    rng = np.random.default_rng(7)
    cases = [("Dirichlet heat", dirichlet_tuple(heat(1)), make_grid(TWO_PI, 1, 16, [(8.0, 512)], 0)),
             ("Neumann heat", neumann_heat(1), make_grid(TWO_PI, 1, 16, [(8.0, 512)], 0)),
             ("clamped biharmonic", clamped(2),
              make_grid(TWO_PI, 2, 16, [(8.0, 16), (8.0, 512)], 1))]
    tr_err, bl_err = 0.0, 0.0
    parts = []
    for name, tup, g in cases:
        table = build_factor_table(tup, g)
        kern = build_boundary_kernel(tup, table, g)
        m = tup.m
        e1 = float(np.abs(_fd_symbol_trace(kern, m) - np.eye(m)).max())
        e2 = 0.0
        for _ in range(3):
            d = [_random_boundary(g, rng) for _ in range(m)]
            lhs = boundary_values(lift_dirichlet(d, kern), tup)
            rhs = apply_char_matrix(d, tup, table)
            e2 = max(e2, max(lp_norm(a - b) / lp_norm(b) for a, b in zip(lhs, rhs)))
        tr_err, bl_err = max(tr_err, e1), max(bl_err, e2)
        parts.append(f"{name} {e1:.1e}/{e2:.1e}")
    report(7, tr_err <= 1e-8 and bl_err <= 1e-6,
           f"tr L - I (FD) / B L d - F d: " + "; ".join(parts))


# ---------------------------------------------------------------------------- 8

def test_criterion_8_oracle():
    t0 = time.perf_counter()
    out = {}
    for kind in ("dirichlet", "neumann"):
        fam = halfspace_heat_family(kind, n=1, N_t=16, L_n=16.0)
        out[kind] = (fam(256), fam(512))
    dt = time.perf_counter() - t0
    ok = dt <= 60 and all(a <= 1e-3 and a / b >= 1.5 for a, b in out.values())
    report(8, ok, "; ".join(f"{k} {a:.1e} -> {b:.1e} ({a / b:.2f}x)" for k, (a, b) in out.items())
           + f"; {dt:.1f} s")


# ---------------------------------------------------------------------------- 9

def test_criterion_9_complementing():
    good = check_all(dirichlet_tuple(heat(2)))
    bad = check_all(OperatorTuple(heat(2), (monomial(2, (1, 0)),)))
    wit = [r.witness for r in bad.complementing.values() if not r.ok]
    at_zero = bool(wit) and all(w["xi_prime"] == [0.0] and w["det_ratio"] == 0.0 for w in wit)
    report(9, good.ok and not bad.ok and at_zero,
           f"Dirichlet heat ok={good.ok}; tangential BC ok={bad.ok}, witness {wit[:1]}")


# --------------------------------------------------------------------------- 10

def test_criterion_10_sweeps():
    ws = estimate_sweep(heat(2), make_grid(TWO_PI, 2, 8, [(np.pi, 16), (np.pi, 16)]), 100, seed=10)
    g_hs = make_grid(TWO_PI, 1, 16, [(16.0, 256)], 0)
    hs = estimate_sweep(dirichlet_tuple(heat(1)), g_hs, 100, seed=10, domain="half",
                        refine_axes=[0])
    ratios, analytic = single_mode_sweep(heat(1), make_grid(TWO_PI, 1, 16, [(np.pi, 32)]))
    single = abs(max(ratios) - max(analytic))
    finite = all(np.isfinite([ws.supremum, ws.supremum_refined, hs.supremum, hs.supremum_refined]))
    ok = finite and ws.drift < 0.05 and hs.drift < 0.05 and single <= 1e-10
    report(10, ok, f"whole sup {ws.supremum:.4f} drift {ws.drift:.1e}; half sup {hs.supremum:.4f} "
                   f"drift {hs.drift:.1e}; single-mode |sup - analytic| {single:.1e}")


# --------------------------------------------------------------------------- 11

def test_criterion_11_reproducibility(tmp_path):
    spec = os.path.join(SPECS, "heat_dirichlet_half.yaml")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        codes = [cli_main(["run", spec, "-o", str(tmp_path / t)]) for t in "ab"]
        sweep = [cli_main(["sweep", os.path.join(SPECS, "heat_whole.yaml"), "--samples", "30",
                           "--seed", "5", "-o", str(tmp_path / t)]) for t in "ab"]
    names = sorted(os.listdir(tmp_path / "a"))
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in names)
    u = read_field(tmp_path / "a" / "solution.tpf")
    write_field(tmp_path / "copy.tpf", u)
    again = read_field(tmp_path / "copy.tpf")
    bit = (again.data.tobytes() == u.data.tobytes()
           and (tmp_path / "copy.tpf").read_bytes() == (tmp_path / "a" / "solution.tpf").read_bytes())
    ok = codes == [0, 0] and sweep == [0, 0] and same and bit
    report(11, ok, f"{len(names)} report files byte-identical: {same}; field round trip bit-exact: {bit}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
