import numpy as np
import pytest

from tppar.errors import RootOnRealAxis, SingularCharMatrix, StateMismatch
from tppar.grid import from_function, lp_norm, make_grid, take_half
from tppar.halfspace import (HalfSpaceProblem, TruncationWarning, apply_char_matrix,
                             apply_factor, apply_factor_inverse, boundary_values,
                             bootstrap_chain, build_boundary_kernel, build_factor_table,
                             dirichlet_tuple, estimate_ratio_hs, factor_values,
                             lift_dirichlet, solve_general, solve_zero_trace)
from tppar.oracles import (ModeSpec, boundary_from_modes, field_from_modes,
                           oracle_disagreement)
from tppar.symbols import OperatorTuple, laplacian_power, monomial, split_roots

TWO_PI = 2 * np.pi
HEAT1 = laplacian_power(1, 1)
RHO_HEAT = np.exp(3j * np.pi / 4)

pytestmark = pytest.mark.filterwarnings("ignore::tppar.halfspace.TruncationWarning")


def heat_grid(N_n=256, L_n=16.0, N_t=16):
    return make_grid(TWO_PI, 1, N_t, [(L_n, N_n)], 0)


def mode_row(table, k, xi_prime=()):
    for i, (e, xp) in enumerate(zip(table.fact.eta, table.fact.xi_prime)):
        if e == k and np.allclose(xp, xi_prime):
            return i
    raise KeyError(k)


# ------------------------------------------------------------ factor table

def test_factor_table_counts():
    g = heat_grid(N_t=8)
    t = build_factor_table(dirichlet_tuple(HEAT1), g)
    assert t.size == 6
    assert sorted(t.fact.eta) == [-3, -2, -1, 1, 2, 3]
    assert t.fact.rho_plus.shape == (6, 1)


def test_factor_table_backward_heat_reflected():
    g = heat_grid(N_t=8)
    fwd = build_factor_table(dirichlet_tuple(HEAT1), g)
    bwd = build_factor_table(dirichlet_tuple(-HEAT1), g)
    assert bwd.size == fwd.size
    for k in (1, 2, 3):
        # z^2 = ik for backward heat, z^2 = -ik for heat
        assert abs(bwd.fact.rho_plus[mode_row(bwd, k), 0]
                   - fwd.fact.rho_plus[mode_row(fwd, -k), 0]) < 1e-12


def test_factor_table_root_on_axis():
    with pytest.raises(RootOnRealAxis) as ei:
        build_factor_table(dirichlet_tuple(laplacian_power(1, 1, 1j)), heat_grid(N_t=8))
    assert ei.value.witness["eta"] < 0


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        build_factor_table(dirichlet_tuple(HEAT1), heat_grid(L_n=4.0, N_n=64))


def test_minus_factor_example():
    t = build_factor_table(dirichlet_tuple(HEAT1), heat_grid())
    i = mode_row(t, 1.0)
    val = 1 / (t.fact.leading * factor_values(t, "minus", np.array([0.0]))[i, 0])
    assert abs(val - (-1 / np.exp(-1j * np.pi / 4))) < 1e-12


def test_factor_inverse_pair():
    g = heat_grid()
    t = build_factor_table(dirichlet_tuple(HEAT1), g)
    u = from_function(g, lambda tt, x: (np.exp(1j * tt) + 0.3 * np.exp(-2j * tt))
                      * np.exp(-(x - 2) ** 2))
    for side in ("plus", "minus"):
        back = apply_factor(apply_factor_inverse(u, t, side), t, side)
        assert lp_norm(back - u) < 1e-12 * lp_norm(u)
    zero = apply_factor_inverse(u * 0, t, "plus")
    assert not np.any(zero.data)


def test_factor_inverse_needs_full_field():
    g = heat_grid()
    t = build_factor_table(dirichlet_tuple(HEAT1), g)
    with pytest.raises(StateMismatch):
        apply_factor_inverse(take_half(from_function(g, lambda tt, x: np.sin(tt) + 0 * x)), t, "plus")


# ----------------------------------------------------------- zero trace

def test_zero_trace_zero_rhs():
    g = heat_grid()
    t = build_factor_table(dirichlet_tuple(HEAT1), g)
    u = solve_zero_trace(field_from_modes(g, [], half=True), t)
    assert not np.any(u.data)


def test_zero_trace_matches_oracle():
    g = heat_grid()
    tup = dirichlet_tuple(HEAT1)
    f_modes = [ModeSpec(1.0, (), 1.0, 8.0, 1.0)]
    u = solve_zero_trace(field_from_modes(g, f_modes, half=True), build_factor_table(tup, g))
    assert oracle_disagreement(u, tup, f_modes, [[]], "dirichlet") < 1e-3


# --------------------------------------------------------------- kernel

def test_heat_kernel_single_residue():
    g = heat_grid()
    tup = dirichlet_tuple(HEAT1)
    t = build_factor_table(tup, g)
    kern = build_boundary_kernel(tup, t)
    i = mode_row(t, 1.0)
    x = np.linspace(0, 5, 11)
    assert np.allclose(kern.evaluate(x)[i, 0], np.exp(1j * RHO_HEAT * x), atol=1e-14)
    assert abs(kern.K_raw[i, 0, 0] - 1) < 1e-14


def test_biharmonic_kernel_decay_rate():
    g = make_grid(TWO_PI, 1, 16, [(32.0, 512)], 0)
    tup = dirichlet_tuple(laplacian_power(1, 2))
    t = build_factor_table(tup, g)
    kern = build_boundary_kernel(tup, t)
    i = mode_row(t, 1.0)
    rho = t.fact.rho_plus[i]
    assert np.any(np.abs(rho.imag - np.sin(3 * np.pi / 8)) < 1e-12)
    assert abs(rho.imag.min() - np.sin(np.pi / 8)) < 1e-12
    v = np.abs(kern.evaluate([20.0, 25.0])[i])
    rate = np.log(v[:, 0] / v[:, 1]) / 5
    assert np.allclose(rate, np.sin(np.pi / 8), atol=1e-4)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_kernel_symbol_trace_identity(m):
    g = make_grid(TWO_PI, 2, 8, [(4.0, 8), (16.0, 128)], 1)
    tup = dirichlet_tuple(laplacian_power(2, m))
    t = build_factor_table(tup, g)
    kern = build_boundary_kernel(tup, t)
    err = np.abs(kern.symbol_trace() - np.eye(m)).max()
    assert err < 1e-8


def test_contour_fallback_matches_residues():
    g = make_grid(TWO_PI, 2, 8, [(4.0, 8), (8.0, 64)], 1)
    clamped = OperatorTuple(laplacian_power(2, 2), (monomial(2, (0, 0)), monomial(2, (0, 1))))
    t = build_factor_table(clamped, g)
    a = build_boundary_kernel(clamped, t)
    b = build_boundary_kernel(clamped, t, force_contour=True)
    assert b.contour.all() and not a.contour.any()
    x = np.linspace(0, 8, 33)
    scale = np.abs(a.evaluate(x)).max()
    assert np.abs(a.evaluate(x) - b.evaluate(x)).max() < 1e-10 * scale


# -------------------------------------------------------------- lifting

def test_lift_single_mode_closed_form():
    g = heat_grid()
    tup = dirichlet_tuple(HEAT1)
    kern = build_boundary_kernel(tup, build_factor_table(tup, g))
    gf = boundary_from_modes(g, [ModeSpec(1.0, (), 0.7 - 0.2j)])
    u = lift_dirichlet([gf], kern)
    expect = from_function(g, lambda tt, x: (0.7 - 0.2j) * np.exp(1j * tt)
                           * np.exp(1j * RHO_HEAT * x), half=True)
    assert lp_norm(u - expect) < 1e-6 * lp_norm(expect)


def test_lift_zero():
    g = heat_grid()
    tup = dirichlet_tuple(HEAT1)
    kern = build_boundary_kernel(tup, build_factor_table(tup, g))
    u = lift_dirichlet([boundary_from_modes(g, [])], kern)
    assert not np.any(u.data)


def test_boundary_values_of_lift():
    g = make_grid(TWO_PI, 2, 8, [(8.0, 16), (8.0, 512)], 1)
    tup = dirichlet_tuple(laplacian_power(2, 2))
    kern = build_boundary_kernel(tup, build_factor_table(tup, g))
    rng = np.random.default_rng(0)
    d = [boundary_from_modes(g, [ModeSpec(float(rng.choice([-2, -1, 1, 2])),
                                          (np.pi / 8 * rng.integers(-3, 4),),
                                          complex(rng.normal(), rng.normal()))
                                 for _ in range(4)]) for _ in range(2)]
    back = boundary_values(lift_dirichlet(d, kern), tup)
    for a, b in zip(back, d):
        assert lp_norm(a - b) < 1e-6 * lp_norm(b)


def test_boundary_values_plane_mode():
    g = heat_grid(N_n=512)
    rho = RHO_HEAT
    u = from_function(g, lambda tt, x: np.exp(1j * tt) * np.exp(1j * rho * x), half=True)
    tup = dirichlet_tuple(laplacian_power(1, 2))   # D^0, D^1
    v0, v1 = boundary_values(u, tup)
    assert np.abs(v0.data - np.exp(1j * g.t)).max() < 1e-8
    assert np.abs(v1.data - rho * np.exp(1j * g.t)).max() < 1e-6


def test_even_field_has_no_odd_derivative():
    g = heat_grid(N_n=512)
    u = from_function(g, lambda tt, x: np.sin(tt) * np.exp(-x ** 2), half=True)
    neumann = OperatorTuple(HEAT1, (monomial(1, (1,)),))
    (val,) = boundary_values(u, neumann)
    # one-sided stencil error floor at h = 1/16 is a few 1e-6
    assert np.abs(val.data).max() < 1e-5


# -------------------------------------------------------------- solving

def test_solve_general_dirichlet_reduces_to_lift():
    g = heat_grid()
    tup = dirichlet_tuple(HEAT1)
    gm = [ModeSpec(1.0, (), 1.0), ModeSpec(-3.0, (), 0.5j)]
    gf = [boundary_from_modes(g, gm)]
    u = solve_general(HalfSpaceProblem(tup, g, field_from_modes(g, [], half=True), gf))
    kern = build_boundary_kernel(tup, build_factor_table(tup, g))
    assert lp_norm(u - lift_dirichlet(gf, kern)) < 1e-14 * lp_norm(u)


def test_neumann_single_mode():
    g = heat_grid()
    tup = OperatorTuple(HEAT1, (monomial(1, (1,)),))
    gf = [boundary_from_modes(g, [ModeSpec(1.0, (), 1.0)])]
    u = solve_general(HalfSpaceProblem(tup, g, field_from_modes(g, [], half=True), gf, "general"))
    expect = from_function(g, lambda tt, x: np.exp(1j * tt) * np.exp(1j * RHO_HEAT * x)
                           / RHO_HEAT, half=True)
    assert lp_norm(u - expect) < 1e-6 * lp_norm(expect)


def test_dirichlet_rhs_only_boundary_small():
    g = heat_grid()
    tup = dirichlet_tuple(HEAT1)
    f = field_from_modes(g, [ModeSpec(1.0, (), 1.0, 8.0, 1.0)], half=True)
    u = solve_general(HalfSpaceProblem(tup, g, f, [boundary_from_modes(g, [])]))
    (bv,) = boundary_values(u, tup)
    assert np.abs(bv.data).max() <= 1e-3 * np.abs(u.data).max()


def test_tangential_bc_singular():
    g = make_grid(TWO_PI, 2, 8, [(8.0, 16), (16.0, 64)], 1)
    tup = OperatorTuple(laplacian_power(2, 1), (monomial(2, (1, 0)),))
    f = field_from_modes(g, [ModeSpec(1.0, (0.0,), 1.0, 8.0)], half=True)
    with pytest.raises(SingularCharMatrix):
        solve_general(HalfSpaceProblem(tup, g, f, [boundary_from_modes(g, [])], "general"))


def test_char_matrix_multiplier_round_trip():
    g = heat_grid()
    tup = OperatorTuple(HEAT1, (monomial(1, (1,)),))
    t = build_factor_table(tup, g)
    d = [boundary_from_modes(g, [ModeSpec(1.0, (), 1.0), ModeSpec(-2.0, (), 0.3)])]
    Fd = apply_char_matrix(d, tup, t)
    # F = [rho+(k)] for Neumann heat
    r1, r2 = split_roots(HEAT1, 1.0)[0][0], split_roots(HEAT1, -2.0)[0][0]
    expect = r1 * np.exp(1j * g.t) + 0.3 * r2 * np.exp(-2j * g.t)
    assert np.abs(Fd[0].data - expect).max() < 1e-12
    back = apply_char_matrix(Fd, tup, t, inverse_=True)
    assert lp_norm(back[0] - d[0]) < 1e-12 * lp_norm(d[0])


# ------------------------------------------------------------- estimates

def test_ratio_stable_under_refinement():
    tup = dirichlet_tuple(HEAT1)
    vals = []
    for N_n in (256, 512):
        g = heat_grid(N_n=N_n)
        f = field_from_modes(g, [], half=True)
        gf = [boundary_from_modes(g, [ModeSpec(1.0, (), 1.0)])]
        u = solve_general(HalfSpaceProblem(tup, g, f, gf))
        vals.append(estimate_ratio_hs(u, f, gf))
    assert np.isfinite(vals).all()
    assert abs(vals[1] - vals[0]) <= 0.05 * vals[0]


def test_bootstrap_chain_finite():
    g = make_grid(TWO_PI, 2, 8, [(8.0, 16), (16.0, 256)], 1)
    tup = dirichlet_tuple(laplacian_power(2, 1))
    f = field_from_modes(g, [ModeSpec(1.0, (np.pi / 8,), 1.0, 8.0)], half=True)
    u = solve_general(HalfSpaceProblem(tup, g, f, [boundary_from_modes(g, [])]))
    chain = bootstrap_chain(u, 1)
    assert len(chain) == 2 and all(np.isfinite(chain)) and min(chain) > 0
