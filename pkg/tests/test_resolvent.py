import numpy as np
import pytest

from thinfilm import evolution
from thinfilm import grid as gridmod
from thinfilm import polyops, resolvent
from thinfilm.errors import CompatibilityError, GridError, SolverError


def manufactured(grid, lam):
    """u* = x^2 e^{-x} with analytically computed right-hand side.

    The third derivative of x^2 e^{-x} is (-6 + 6x - x^2) e^{-x}; pushing it
    through the operator gives the polynomial below.
    """
    x = grid.x
    ustar = x**2 * np.exp(-x)
    gpoly = lam * x**2 + x**5 - 10 * x**4 + 20 * x**3 + 6 * x**2 - 12 * x
    return (gridmod.GridFunction(grid, ustar),
            gridmod.GridFunction(grid, np.exp(-x) * gpoly))


def test_assemble_requires_nodes():
    with pytest.raises(GridError):
        resolvent.assemble(gridmod.LogGrid(-12, 4, 32))


def test_assembled_rows_match_independent_application(fine_grid):
    op = resolvent.assemble(fine_grid)
    w = gridmod.GridFunction(fine_grid, fine_grid.x**2 * np.exp(-fine_grid.x))
    via_rows = op.apply(w).values
    via_stencils = polyops.apply_operator(w).values
    interior = slice(8, -8)
    scale = np.max(np.abs(via_stencils))
    assert np.max(np.abs(via_rows - via_stencils)[interior]) / scale < 1e-6


def test_kernel_rows_shrink_at_stencil_order():
    errs = []
    for n in (65, 129, 257):
        g = gridmod.LogGrid(-12, 4, n)
        op = resolvent.assemble(g)
        window = (g.s >= -10) & (g.s <= 2)
        res = [np.max(np.abs(op.apply(gridmod.monomial(g, j)).values[window]))
               for j in (1, 2)]
        errs.append(max(res))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) > 3.5


def test_apply_monomial_three(fine_grid):
    op = resolvent.assemble(fine_grid)
    got = op.apply(gridmod.monomial(fine_grid, 3)).values
    x = fine_grid.x
    target = 18 * x**2 + 12 * x
    interior = slice(8, -8)
    assert np.max(np.abs(got - target)[interior] / target[interior]) < 1e-6


def test_solve_zero_and_linearity(fine_grid):
    op = resolvent.assemble(fine_grid)
    zero = gridmod.zero(fine_grid)
    sol = resolvent.solve(op, 2.0, zero)
    assert np.max(np.abs(sol.solution.values)) == 0.0

    _, g = manufactured(fine_grid, 2.0)
    fac = resolvent.Factorization(op, 2.0)
    u1 = resolvent.solve(op, 2.0, g, factorization=fac).solution.values
    u3 = resolvent.solve(op, 2.0, 3.0 * g, factorization=fac).solution.values
    # linear up to the refinement step's rounding
    assert np.max(np.abs(u3 - 3.0 * u1)) <= 1e-8 * np.max(np.abs(u3))


def test_manufactured_convergence():
    lam = 1.0
    errs = []
    for n in (257, 513, 1025):
        g = gridmod.LogGrid(-12, 4, n)
        ustar, rhs = manufactured(g, lam)
        op = resolvent.assemble(g)
        sol = resolvent.solve(op, lam, rhs)
        errs.append(np.linalg.norm(sol.solution.values - ustar.values)
                    / np.linalg.norm(ustar.values))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 2.0


def test_manufactured_residual_is_small(fine_grid):
    ustar, rhs = manufactured(fine_grid, 1.0)
    op = resolvent.assemble(fine_grid)
    sol = resolvent.solve(op, 1.0, rhs)
    assert sol.residual_norm < 1e-7


def test_compatibility_probe():
    g = gridmod.LogGrid()
    op = resolvent.assemble(g)
    bad = gridmod.GridFunction(g, np.ones(g.n))
    with pytest.raises(CompatibilityError):
        resolvent.solve(op, 1.0, bad)


def test_lambda_must_be_positive(fine_grid):
    op = resolvent.assemble(fine_grid)
    with pytest.raises(SolverError):
        resolvent.Factorization(op, 0.0)


def test_far_field_rate_on_model_function():
    g = gridmod.LogGrid(-12, 7, 1217)
    lam = 3.0
    u = gridmod.GridFunction(g, np.exp(-2 * np.sqrt(2) * (lam * g.x) ** 0.25))
    rate = resolvent.far_field_rate(u, lam)
    assert rate == pytest.approx(1 / np.sqrt(2), abs=1e-10)


def test_far_field_rate_flags_non_decay():
    g = gridmod.LogGrid(-12, 7, 1217)
    flat = gridmod.GridFunction(g, np.ones(g.n))
    assert np.isnan(resolvent.far_field_rate(flat, 1.0))
    grow = gridmod.monomial(g, 1)
    assert np.isnan(resolvent.far_field_rate(grow, 1.0))


def test_far_field_rate_of_computed_solution():
    g = gridmod.LogGrid(-12, 7, 2433)
    x = g.x
    op = resolvent.assemble(g)
    sol = resolvent.solve(op, 1.0, gridmod.GridFunction(g, x**2 * np.exp(-x)))
    assert 0.55 <= sol.decay_rate_fit <= 0.85


def test_left_edge_coefficient_relation():
    # steady-state recursion at j = 1: lam u1 + 12 u3 = g1
    lam = 1.0
    g = gridmod.LogGrid(-12, 4, 2049)
    _, rhs = manufactured(g, lam)
    op = resolvent.assemble(g)
    sol = resolvent.solve(op, lam, rhs)
    u1, _, u3 = evolution.leading_coefficients(sol.solution)
    g1 = -12.0  # leading coefficient of the manufactured right-hand side
    assert abs(lam * u1 + 12 * u3 - g1) / abs(g1) < 1e-3
