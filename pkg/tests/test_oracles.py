import numpy as np
import pytest

from tppar.errors import SingularSystem
from tppar.grid import make_grid
from tppar.halfspace import HalfSpaceProblem, dirichlet_tuple, solve_general
from tppar.oracles import (ModeODEProblem, ModeSpec, analytic_heat_halfspace,
                           boundary_from_modes, convergence_study, estimate_sweep,
                           field_from_modes, fornberg_weights, halfspace_heat_family,
                           manufactured_residual, ode_oracle, single_mode_sweep)
from tppar.symbols import OperatorTuple, laplacian_power, monomial
from tppar.wholespace import WholeSpaceProblem, solve_wholespace

TWO_PI = 2 * np.pi
HEAT1 = laplacian_power(1, 1)
RHO = np.exp(3j * np.pi / 4)

pytestmark = pytest.mark.filterwarnings("ignore::tppar.halfspace.TruncationWarning")


def test_fornberg_central_second_derivative():
    w = fornberg_weights(0.0, [-1, 0, 1], 2)
    assert np.allclose(w[2], [1, -2, 1]) and np.allclose(w[1], [-0.5, 0, 0.5])


def test_analytic_heat_value():
    val = analytic_heat_halfspace(1.0, [], 1.0, [1.0])[0]
    # e^{i rho+} = e^{-1/sqrt2} (cos(1/sqrt2) - i sin(1/sqrt2))
    s = 2 ** -0.5
    assert abs(val - np.exp(-s) * (np.cos(s) - 1j * np.sin(s))) < 1e-15
    assert abs(val - (0.374853 - 0.320316j)) < 1e-6


def test_oracle_dirichlet_closed_form():
    prob = ModeODEProblem(1.0, (), dirichlet_tuple(HEAT1), None, (1.0,), 32.0, 2048, "dirichlet")
    sol = ode_oracle(prob)
    x = prob.nodes
    ref = np.exp(1j * RHO * x)
    assert np.max(np.abs(sol - ref)) < 1e-6


def test_oracle_neumann_closed_form():
    tup = OperatorTuple(HEAT1, (monomial(1, (1,)),))
    prob = ModeODEProblem(1.0, (), tup, None, (1.0,), 32.0, 2048)
    sol = ode_oracle(prob)
    assert np.max(np.abs(sol - np.exp(1j * RHO * prob.nodes) / RHO)) < 1e-6


def test_oracle_gaussian_matches_zero_trace_slice():
    g = make_grid(TWO_PI, 1, 16, [(16.0, 256)], 0)
    tup = dirichlet_tuple(HEAT1)
    fm = [ModeSpec(1.0, (), 1.0, 8.0, 1.0)]
    u = solve_general(HalfSpaceProblem(tup, g, field_from_modes(g, fm, half=True),
                                       [boundary_from_modes(g, [])]))
    prob = ModeODEProblem(1.0, (), tup, lambda x: np.exp(-(x - 8.0) ** 2), (0.0,),
                          32.0, 4096, "dirichlet")
    ref = ode_oracle(prob)[::16][:128]
    sl = np.fft.fft(u.data, axis=0)[1] / 16
    assert np.linalg.norm(sl - ref) <= 1e-3 * np.linalg.norm(ref)


def test_oracle_singular_tangential_bc():
    tup = OperatorTuple(laplacian_power(2, 1), (monomial(2, (1, 0)),))
    with pytest.raises(SingularSystem) as ei:
        ode_oracle(ModeODEProblem(1.0, (0.0,), tup, None, (1.0,), 16.0, 512))
    assert ei.value.witness["xi_prime"] == [0.0]


def test_convergence_study_dirichlet():
    table = convergence_study(halfspace_heat_family("dirichlet"), [64, 128, 256])
    e = table.errors
    assert e[0] > e[1] > e[2]
    assert min(table.orders) >= 1.0
    assert len(table.rows()) == 3


def test_convergence_study_needs_three():
    with pytest.raises(ValueError):
        convergence_study(lambda n: 1.0 / n, [8, 16])


def test_manufactured_residual_whole():
    g = make_grid(TWO_PI, 2, 8, [(np.pi, 16), (np.pi, 16)])
    op = laplacian_power(2, 1)
    f = field_from_modes(g, [ModeSpec(1.0, (1.0, 2.0), 1.0), ModeSpec(-2.0, (0.0, 1.0), 0.5j)])
    u = solve_wholespace(WholeSpaceProblem(op, g, f))
    assert manufactured_residual(u, f, op) < 1e-13


def test_manufactured_residual_half_converges():
    tup = dirichlet_tuple(HEAT1)
    fm = [ModeSpec(1.0, (), 1.0, 8.0, 1.0)]
    res = []
    for N_n in (256, 512):
        g = make_grid(TWO_PI, 1, 16, [(16.0, N_n)], 0)
        f = field_from_modes(g, fm, half=True)
        u = solve_general(HalfSpaceProblem(tup, g, f, [boundary_from_modes(g, [])]))
        res.append(manufactured_residual(u, f, HEAT1, g, "half"))
    assert res[0] <= 1e-2 and res[0] / res[1] >= 1.5


def test_sweep_deterministic():
    g = make_grid(TWO_PI, 1, 8, [(np.pi, 16)])
    a = estimate_sweep(HEAT1, g, 20, seed=3)
    b = estimate_sweep(HEAT1, g, 20, seed=3)
    c = estimate_sweep(HEAT1, g, 20, seed=4)
    assert a.digest() == b.digest() and a.digest() != c.digest()


def test_single_mode_sweep_matches_formula():
    g = make_grid(TWO_PI, 1, 8, [(np.pi, 16)])
    ratios, analytic = single_mode_sweep(HEAT1, g)
    assert np.max(np.abs(np.array(ratios) - analytic)) < 1e-10
    assert abs(max(ratios) - max(analytic)) < 1e-10
