import numpy as np
import pytest

from mvset import (
    ChartMetric,
    CoefficientField,
    PreconditionError,
    ScalarField,
    assemble_beltrami,
    assemble_divergence,
    check_ellipticity,
    make_grid,
)


def const_coeffs(grid, a11, a12, a22):
    return CoefficientField(
        ScalarField.constant(grid, a11),
        ScalarField.constant(grid, a12),
        ScalarField.constant(grid, a22),
    )


def test_ellipticity_identity(grid65):
    lam, Lam = check_ellipticity(CoefficientField.identity(grid65))
    assert lam == 1.0 and Lam == 1.0


def test_ellipticity_diagonal(grid65):
    lam, Lam = check_ellipticity(const_coeffs(grid65, 2.0, 0.0, 1.0))
    assert (lam, Lam) == (1.0, 2.0)


def test_ellipticity_rejects_singular(grid65):
    with pytest.raises(PreconditionError, match="node"):
        const_coeffs(grid65, 1.0, 1.0, 1.0)


def test_five_point_laplacian_stencil(lap65, grid65):
    h2 = grid65.h ** 2
    k = grid65.snap((0.0, 0.0))
    row = lap65.matrix.getrow(k).toarray().ravel()
    n = grid65.n_side
    assert row[k] == pytest.approx(-4 / h2)
    for nb in (k + 1, k - 1, k + n, k - n):
        assert row[nb] == pytest.approx(1 / h2)
    assert row[k + n + 1] == 0.0


def test_exact_on_quadratics(lap65, grid65):
    f = ScalarField.from_function(grid65, lambda x, y: x * x + y * y)
    Lf = lap65.apply(f).values[lap65.interior_indices]
    assert np.abs(Lf - 4.0).max() < 1e-9


def test_mixed_term_on_xy(grid65):
    # elliptic variant of the constant cross-coefficient check: L(xy) = 2*a12
    op = assemble_divergence(const_coeffs(grid65, 1.0, 0.5, 1.0), grid65)
    f = ScalarField.from_function(grid65, lambda x, y: x * y)
    Lf = op.apply(f).values[op.interior_indices]
    assert np.abs(Lf - 1.0).max() < 1e-9


def test_annihilates_constants(grid65):
    c = CoefficientField.from_functions(
        grid65,
        lambda x, y: 1 + 0.3 * np.sin(np.pi * x) * np.sin(np.pi * y),
        lambda x, y: 0.15 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y),
        lambda x, y: 1 - 0.3 * np.sin(np.pi * x) * np.sin(np.pi * y),
    )
    op = assemble_divergence(c, grid65)
    one = ScalarField.constant(grid65, 1.0)
    assert np.abs(op.apply(one).values[op.interior_indices]).max() < 1e-10


def test_symmetric_bilinear_form(grid65):
    c = CoefficientField.from_functions(
        grid65,
        lambda x, y: 1 + 0.2 * np.cos(np.pi * x),
        lambda x, y: 0.1 * np.sin(np.pi * x) * np.sin(np.pi * y),
        lambda x, y: 1 + 0.2 * np.sin(np.pi * y),
    )
    op = assemble_divergence(c, grid65)
    rng = np.random.default_rng(3)
    u = np.zeros(grid65.n_nodes)
    v = np.zeros(grid65.n_nodes)
    interior = op.interior_indices
    u[interior] = rng.standard_normal(interior.size)
    v[interior] = rng.standard_normal(interior.size)
    a = float(v @ (op.matrix @ u))
    b = float(u @ (op.matrix @ v))
    assert abs(a - b) <= 1e-9 * max(abs(a), 1.0)


def test_beltrami_flat_equals_laplacian(grid65, lap65):
    op = assemble_beltrami(ChartMetric.flat(grid65), grid65)
    assert (op.matrix != lap65.matrix).nnz == 0
    assert np.all(op.rho == 1.0)


def test_beltrami_conformal_closed_form(grid129):
    # g = e^{2 phi} I with phi = 0.1x gives Delta_g u = e^{-2 phi} Delta u
    m = ChartMetric.from_functions(
        grid129,
        lambda x, y: np.exp(0.2 * x),
        lambda x, y: 0.0 * x,
        lambda x, y: np.exp(0.2 * x),
    )
    op = assemble_beltrami(m, grid129)
    u = ScalarField.from_function(grid129, lambda x, y: x * x + y * y)
    got = op.apply(u).values
    x, _ = grid129.coords()
    want = 4.0 * np.exp(-0.2 * x)
    interior = op.interior_indices
    err = np.abs(got[interior] - want[interior]).max()
    assert err < 2e-3


def test_beltrami_constant_diagonal_metric(grid65):
    # g = diag(4, 1): Delta_g u = u_xx / 4 + u_yy, exact on quadratics
    m = ChartMetric.from_functions(
        grid65,
        lambda x, y: 4.0 + 0 * x,
        lambda x, y: 0.0 * x,
        lambda x, y: 1.0 + 0 * x,
    )
    op = assemble_beltrami(m, grid65)
    u = ScalarField.from_function(grid65, lambda x, y: x * x)
    got = op.apply(u).values[op.interior_indices]
    assert np.abs(got - 0.5).max() < 1e-9


def test_metric_rejects_degenerate(grid65):
    with pytest.raises(PreconditionError, match="degenerate"):
        ChartMetric.from_functions(
            grid65,
            lambda x, y: 1.0 + 0 * x,
            lambda x, y: 1.0 + 0 * x,
            lambda x, y: 1.0 + 0 * x,
        )


def test_second_order_convergence_conformal():
    errs = []
    for n in (65, 129):
        g = make_grid(-1, 1, n)
        m = ChartMetric.from_functions(
            g,
            lambda x, y: np.exp(0.2 * x),
            lambda x, y: 0.0 * x,
            lambda x, y: np.exp(0.2 * x),
        )
        op = assemble_beltrami(m, g)
        u = ScalarField.from_function(g, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        x, yc = g.coords()
        want = -2 * np.pi ** 2 * np.exp(-0.2 * x) * np.sin(np.pi * x) * np.sin(np.pi * yc)
        interior = op.interior_indices
        errs.append(np.abs(op.apply(u).values[interior] - want[interior]).max())
    assert errs[0] / errs[1] >= 3.5


def test_integration_by_parts(grid65):
    m = ChartMetric.from_functions(
        grid65,
        lambda x, y: np.exp(0.2 * x),
        lambda x, y: 0.05 * np.sin(np.pi * x) * np.sin(np.pi * y),
        lambda x, y: np.exp(-0.1 * y),
    )
    op = assemble_beltrami(m, grid65)
    h2 = grid65.h ** 2
    u = ScalarField.from_function(
        grid65, lambda x, y: np.maximum(0.0, 0.25 - x * x - y * y) ** 2)
    phi = ScalarField.from_function(
        grid65, lambda x, y: np.maximum(0.0, 0.2 - (x - 0.1) ** 2 - y * y) ** 2)
    # rho * phi * (L u) summed = rho * u * (L phi) summed (self-adjointness)
    a = float(np.sum(phi.values * (op.matrix @ u.values)) * h2)
    b = float(np.sum(u.values * (op.matrix @ phi.values)) * h2)
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))
