import numpy as np
import pytest

from mvset import (
    ContactStatus,
    PreconditionError,
    ScalarField,
    ShiftBoundaryProblem,
    contact_status,
    find_shift,
    make_grid,
    normalize_at_origin,
    preservation_check,
    shift_decay,
    solve_lcp,
    solve_shift,
    uniqueness_scan,
)
from mvset.scenarios import build_scenario, data_ridge, make_laplacian


@pytest.fixture(scope="module")
def grid161():
    return make_grid(-1.0, 1.0, 161)


@pytest.fixture(scope="module")
def lap161(grid161):
    return make_laplacian(grid161)


def test_contact_status_trichotomy(lap161, grid161):
    k = grid161.snap((0.0, 0.0))
    zero = ScalarField.constant(grid161, 0.0)
    full = solve_shift(lap161, ShiftBoundaryProblem(zero, k, 0.4, -1.0))
    assert contact_status(full, k) == ContactStatus.INTERIOR_CONTACT
    lifted = solve_shift(lap161, ShiftBoundaryProblem(zero, k, 0.4, 0.3))
    assert contact_status(lifted, k) == ContactStatus.NONCONTACT
    ridge = solve_shift(lap161, ShiftBoundaryProblem(data_ridge(grid161), k, 0.4, 0.0))
    assert contact_status(ridge, k) == ContactStatus.FREE_BOUNDARY


def test_contact_status_needs_margin(lap161, grid161):
    from mvset.errors import GeometryError
    sol = solve_shift(
        lap161, ShiftBoundaryProblem(data_ridge(grid161), grid161.snap((0, 0)), 0.4, 0.0))
    edge = grid161.snap((0.4 - grid161.h, 0.0))
    with pytest.raises(GeometryError, match="margin"):
        contact_status(sol, edge)


def test_find_shift_symmetric_model(grid161):
    w = data_ridge(grid161)
    for r in (0.8, 0.4):
        res = find_shift(w, r, tol_T=1e-6)
        assert abs(res.S) <= 1e-6
        assert res.status_at_S == ContactStatus.FREE_BOUNDARY
        assert not res.pinched
        assert res.steps <= 25


def test_find_shift_bisection_arithmetic(grid161):
    # bracket width max(w_r) + 1 + 1.25 = 2.75 at tol 1e-6: ceil(log2) = 22
    res = find_shift(data_ridge(grid161), 0.4, tol_T=1e-6)
    lo, hi = res.bracket_history[0]
    width = hi - lo
    assert res.steps == int(np.ceil(np.log2(width / 1e-6)))


def test_find_shift_zero_field(grid161):
    # w = 0: the transition sits at T = 1/(2n) = 1/4 (contact disc shrinks to
    # a point there); interior contact below, noncontact above
    res = find_shift(ScalarField.constant(grid161, 0.0), 0.6, tol_T=1e-4)
    assert abs(res.S - 0.25) <= 0.02


def test_find_shift_tolerance_stability(grid161):
    w = data_ridge(grid161)
    a = find_shift(w, 0.4, tol_T=1e-4).S
    b = find_shift(w, 0.4, tol_T=1e-6).S
    assert abs(a - b) <= 1e-4


def test_find_shift_requires_contact_at_center(grid161):
    w = ScalarField.constant(grid161, 0.5)
    with pytest.raises(PreconditionError, match="contact"):
        find_shift(w, 0.4)


def test_uniqueness_scan_pattern(grid161):
    w = data_ridge(grid161)
    rep = uniqueness_scan(w, 0.4, [-0.1, -0.05, 0.0, 0.05, 0.1])
    labels = rep.labels()
    assert rep.monotone
    assert labels[:2] == ["interior-contact", "interior-contact"]
    assert labels[-2:] == ["noncontact", "noncontact"]
    assert labels[2] in ("free-boundary", "noncontact")
    assert rep.single_band


def test_uniqueness_scan_saturated_ranges(grid161):
    w = data_ridge(grid161)
    wmax = w.values[np.hypot(*grid161.coords()) < 0.4].max()
    below = uniqueness_scan(w, 0.4, [-wmax / 0.16 - 0.5, -wmax / 0.16 - 0.25])
    assert all(s == ContactStatus.INTERIOR_CONTACT for s in below.statuses)
    above = uniqueness_scan(w, 0.4, [0.26, 0.30])
    assert all(s == ContactStatus.NONCONTACT for s in above.statuses)


def test_uniqueness_scan_rejects_unsorted(grid161):
    with pytest.raises(PreconditionError, match="ascending"):
        uniqueness_scan(data_ridge(grid161), 0.4, [0.1, 0.0])


def test_comparison_continuity_in_T(lap161, grid161):
    w = data_ridge(grid161)
    k = grid161.snap((0.0, 0.0))
    r = 0.4
    s1 = solve_shift(lap161, ShiftBoundaryProblem(w, k, r, -0.02))
    s2 = solve_shift(lap161, ShiftBoundaryProblem(w, k, r, 0.03))
    slack = 10 * (s1.comp_abs + s2.comp_abs)
    d = s1.domain.mask
    sup = np.abs(s2.w.values[d] - s1.w.values[d]).max()
    assert sup <= r * r * 0.05 + slack + 1e-12


def test_shift_decay_requires_descending(grid161):
    with pytest.raises(PreconditionError, match="descending"):
        shift_decay(data_ridge(grid161), [0.2, 0.4])


def test_shift_decay_rejects_regular_seed(grid161):
    from mvset.scenarios import data_halfspace
    lap = make_laplacian(grid161)
    sol = solve_lcp(lap, -lap.rho, bc=data_halfspace(grid161))
    with pytest.raises(PreconditionError, match="singular"):
        shift_decay(sol.w, [0.4, 0.2])


def test_shift_decay_symmetric_model(grid161):
    rep = shift_decay(data_ridge(grid161), [0.8, 0.4, 0.2], tol_T=1e-6)
    assert all(abs(S) <= 1e-6 for _, S in rep.pairs)
    assert rep.envelope_ok and rep.final_leq_first


def test_preservation_model_cases(grid161):
    # ridge: stratum 1 preserved with S = 0 at every radius
    rep = preservation_check(data_ridge(grid161), [0.8, 0.4], tol_T=1e-6)
    assert rep.base_stratum == 1 and rep.preserved
    for r, S, status, cls in rep.entries:
        assert cls.verdict == "singular" and cls.stratum == 1
        assert np.abs(cls.M - np.diag([1.0, 0.0])).max() <= 0.1

    radial = ScalarField.from_function(grid161, lambda x, y: (x * x + y * y) / 4)
    rep0 = preservation_check(radial, [0.8, 0.4], tol_T=1e-6)
    assert rep0.base_stratum == 0 and rep0.preserved
    for _, _, _, cls in rep0.entries:
        assert cls.stratum == 0


def test_singular_scenario_pipeline(grid161):
    op = build_scenario("singular-c11", grid161)
    sol = solve_lcp(op, -op.rho, bc=data_ridge(grid161), source={"kind": "data"})
    w = sol.w
    k = grid161.snap((0.0, 0.0))
    assert w.values[k] == 0.0
    rep = shift_decay(w, [0.8, 0.4, 0.2], tol_T=1e-6)
    mags = [abs(S) for _, S in rep.pairs]
    assert mags[-1] < mags[0]
    assert all(m > 1e-5 for m in mags)  # genuinely nonzero shifts
    assert rep.envelope_ok and rep.final_leq_first
    pres = preservation_check(w, [0.8, 0.4, 0.2], tol_T=1e-6, results=rep.results)
    assert pres.preserved and pres.base_stratum == 1


def test_normalize_at_origin(grid161):
    # w(x) = x^2/2 under a0 = diag(4, 1) becomes 2 y^2 after the change of
    # variables x = a0^{1/2} y
    w = data_ridge(grid161)
    out, r_valid = normalize_at_origin(w, np.diag([4.0, 1.0]))
    want = ScalarField.from_function(grid161, lambda x, y: 2.0 * x * x)
    inside = np.abs(grid161.coords()[0]) <= r_valid
    assert np.abs(out.values[inside] - want.values[inside]).max() < 1e-9
    assert r_valid == pytest.approx(0.5)


def test_normalize_rejects_indefinite(grid161):
    with pytest.raises(PreconditionError, match="SPD"):
        normalize_at_origin(data_ridge(grid161), np.array([[1.0, 2.0], [2.0, 1.0]]))
