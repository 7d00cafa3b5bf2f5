import numpy as np
import pytest
import sympy as sp

from pressure_lab.fields import GridField, make_rough_stream
from pressure_lab.geometry import GeodesicChart
from pressure_lab.norms import build_pair_plan
from pressure_lab.pressure import (EstimateLedger, PressureError,
                                   bc_equivalence_check, boundary_trace,
                                   collar_flux_residual, eta_study,
                                   sanss2_rhs, solve_pressure, split_Pb,
                                   tensor_square)

from conftest import disk_radii


def rigid_velocity(pts):
    pts = np.asarray(pts, dtype=float)
    return np.stack([pts[..., 1], -pts[..., 0]], axis=-1)


def rigid_field(chart):
    return GridField(chart, rigid_velocity(chart.points), pole=np.zeros(2))


def rigid_P_collar(collar):
    # p(s) = (1 - s)^2 / 2 - 1/4 on the unit disk; u.n = 0 so P = p
    s = collar.s[:, None]
    return np.broadcast_to((1.0 - s) ** 2 / 2.0 - 0.25,
                           (collar.n_s + 1, collar.n_theta)).copy()


# ----------------------------------------------------------------------
# pressure solve oracles
# ----------------------------------------------------------------------

def test_rigid_rotation_pressure(disk_chart, cutoffs, collar):
    sol = solve_pressure(rigid_field(disk_chart), collar=collar,
                         cutoffs=cutoffs)
    exact = disk_radii(disk_chart) ** 2 / 2.0 - 0.25
    assert np.max(np.abs(sol.p.values - exact)) < 5e-3
    # u.n = 0, so the adjusted pressure coincides with p
    assert np.max(np.abs(sol.P.values - sol.p.values)) < 1e-12
    inv = sol.check_invariants()
    assert inv["adjustment"] < 1e-14
    assert inv["boundary_support"] == 0.0
    # the interior and boundary windows overlap mid-collar, so the pieces
    # over-cover P there; each one still vanishes on the opposite side
    assert np.max(np.abs(sol.P_i.values[-1])) == 0.0
    excess = sol.P_i.values + sol.P_b.values - sol.P.values
    assert np.min(excess * np.sign(sol.P.values)) > -1e-14


def test_radial_quadratic_pressure(disk_chart, cutoffs, collar):
    # V(r) = r^2: p = r^4/4 - 1/12, d_n p = -V(1)^2 = -1 at the wall
    from pressure_lab.fields import radial_flow
    u = radial_flow(lambda r: r ** 2, disk_chart)
    sol = solve_pressure(u, collar=collar, cutoffs=cutoffs)
    exact = disk_radii(disk_chart) ** 4 / 4.0 - 1.0 / 12.0
    assert np.max(np.abs(sol.p.values - exact)) < 5e-3


def test_zero_field_pressure(disk_chart, cutoffs, collar):
    u = GridField(disk_chart, np.zeros(disk_chart.points.shape),
                  pole=np.zeros(2))
    sol = solve_pressure(u, collar=collar, cutoffs=cutoffs)
    assert np.max(np.abs(sol.p.values)) < 1e-10
    assert np.max(np.abs(sol.P.values)) < 1e-10


def test_non_tangential_velocity_rejected(disk_chart, cutoffs, collar):
    u = GridField(disk_chart, np.broadcast_to([1.0, 0.0],
                  disk_chart.points.shape).copy(), pole=np.array([1.0, 0.0]))
    with pytest.raises(PressureError, match="not tangential"):
        solve_pressure(u, collar=collar, cutoffs=cutoffs)


# ----------------------------------------------------------------------
# collar flux identity
# ----------------------------------------------------------------------

def _stream_pair(psi_str):
    """Velocity grad^perp psi and the double divergence of u x u, both as
    callables of physical points, from a symbolic stream function."""
    x, y = sp.symbols("x y", real=True)
    psi_expr = sp.sympify(psi_str, locals={"x": x, "y": y})
    u1 = sp.diff(psi_expr, y)
    u2 = -sp.diff(psi_expr, x)
    rhs = (sp.diff(u1 * u1, x, 2) + 2 * sp.diff(u1 * u2, x, y)
           + sp.diff(u2 * u2, y, 2))
    fu = sp.lambdify((x, y), (u1, u2), "numpy")
    fr = sp.lambdify((x, y), sp.simplify(rhs), "numpy")

    def velocity(pts):
        pts = np.asarray(pts, dtype=float)
        a, b = fu(pts[..., 0], pts[..., 1])
        return np.stack([np.broadcast_to(a, pts.shape[:-1]),
                         np.broadcast_to(b, pts.shape[:-1])], axis=-1)

    def reference(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(fr(pts[..., 0], pts[..., 1]),
                               pts.shape[:-1]).astype(float)

    return velocity, reference


def test_collar_flux_rigid_exact(collar):
    # rigid rotation: every term is at most quadratic in s, the stencils
    # are exact, and the remainder collapses to the constant -2
    res = collar_flux_residual(rigid_velocity, lambda pts: np.full(
        pts.shape[:-1], -2.0), collar)
    assert np.max(np.abs(res)) < 1e-10


@pytest.mark.parametrize("psi_str", ["(1 - x**2 - y**2)*x",
                                     "(1 - x**2 - y**2)*sin(x + 2*y)"])
def test_collar_flux_residual_second_order(circle, psi_str):
    x, y = sp.symbols("x y", real=True)
    velocity, reference = _stream_pair(psi_str)
    errs = []
    for n_s, n_theta in [(32, 128), (64, 256)]:
        cc = GeodesicChart(circle, 0.4, n_s, n_theta)
        res = collar_flux_residual(velocity, reference, cc)
        errs.append(np.max(np.abs(res[2:-2])))
    ratio = errs[0] / errs[1]
    assert 3.5 <= ratio <= 4.5


# ----------------------------------------------------------------------
# second-s-derivative-free source
# ----------------------------------------------------------------------

def test_sanss2_rigid_exact(collar, cutoffs):
    # rigid pressure is quadratic in s, so every stencil is exact:
    # the source must match -Laplace(phi_b P) = -2 phi_b - phi_b'' P
    # - 2 phi_b' P' - (gamma/J) phi_b' P to rounding
    values, audit = sanss2_rhs(rigid_velocity, rigid_P_collar(collar),
                               cutoffs, collar)
    assert audit["second_s_derivative_free"]
    assert audit["max_s_derivative_order"] == 1
    s = collar.s[:, None]
    P = (1.0 - s) ** 2 / 2.0 - 0.25
    dP = -(1.0 - s)
    exact = (-2.0 * cutoffs.phi_b(s) - cutoffs.phi_b_d2(s) * P
             - 2.0 * cutoffs.phi_b_d1(s) * dP
             + cutoffs.phi_b_d1(s) * P / (1.0 - s))
    assert np.max(np.abs(values - exact)) < 1e-10


def test_sanss2_manufactured_second_order(circle, cutoffs):
    # with rigid velocity the velocity terms are grid-exact, so a smooth
    # non-polynomial pressure isolates the order-2 error of the one s
    # derivative applied to pressure samples
    errs = []
    for n_s, n_theta in [(64, 128), (128, 256)]:
        cc = GeodesicChart(circle, cutoffs.delta, n_s, n_theta)
        s = cc.s[:, None]
        P = np.exp(-2.0 * s) * (1.0 + 0.5 * np.cos(2.0 * cc.theta))
        dP = -2.0 * P
        values, audit = sanss2_rhs(rigid_velocity, P, cutoffs, cc)
        assert audit["max_s_derivative_order"] == 1
        exact = (-2.0 * cutoffs.phi_b(s) - cutoffs.phi_b_d2(s) * P
                 - 2.0 * cutoffs.phi_b_d1(s) * dP
                 + cutoffs.phi_b_d1(s) * P / (1.0 - s))
        errs.append(np.max(np.abs((values - exact)[1:-1])))
    assert errs[0] / errs[1] > 3.0


# ----------------------------------------------------------------------
# boundary-piece split and Green terms
# ----------------------------------------------------------------------

def test_split_Pb_rigid(cutoffs, collar):
    split = split_Pb(rigid_velocity, rigid_P_collar(collar), cutoffs, collar,
                     n_probes=6, seed=3)
    assert split.audit["second_s_derivative_free"]
    assert split.reconstruction_error < 3e-3
    assert split.green_sum_error < 1e-4
    # probes stay away from the wall and the deep edge
    for i, _ in split.probes:
        assert 0 < i < collar.n_s


def test_split_Pb_deterministic(cutoffs, collar):
    a = split_Pb(rigid_velocity, rigid_P_collar(collar), cutoffs, collar,
                 n_probes=3, seed=7)
    b = split_Pb(rigid_velocity, rigid_P_collar(collar), cutoffs, collar,
                 n_probes=3, seed=7)
    assert a.probes == b.probes
    assert np.array_equal(a.I1, b.I1)
    assert np.array_equal(a.P_bi, b.P_bi)


# ----------------------------------------------------------------------
# traces and boundary-condition equivalence
# ----------------------------------------------------------------------

def test_boundary_trace_rigid(collar):
    # d_s P - gamma (u.tau)^2 = -(1 - s) + 1 = s: the trace distance decays
    # linearly as the sample depth shrinks toward the wall
    tc = boundary_trace(rigid_P_collar(collar), rigid_velocity, collar)
    assert np.all(np.diff(tc.distances) < 0)
    assert tc.slope < 0
    assert tc.wall_distance < 5e-2
    assert np.allclose(tc.s, collar.s[[4, 2, 1]])
    rows = tc.as_rows()
    assert len(rows) == 3
    assert rows[0][1] > rows[-1][1]


def test_bc_equivalence_rigid(disk_chart, cutoffs, collar):
    sol = solve_pressure(rigid_field(disk_chart), collar=collar,
                         cutoffs=cutoffs)
    defect = bc_equivalence_check(sol.p, rigid_velocity, collar)
    assert defect < 5e-2


# ----------------------------------------------------------------------
# eta study
# ----------------------------------------------------------------------

def test_eta_study_ledger(disk_chart, cutoffs, collar):
    rough = make_rough_stream(0.5, 11, 1, disk_chart)
    plan = build_pair_plan(disk_chart.points, seed=0, n_random=2000)
    ledger = eta_study([rough], [0.0125, 0.00625], cutoffs, collar, plan)
    recs = ledger.sorted_records()
    assert len(recs) == 2
    assert [r["eta"] for r in recs] == [0.00625, 0.0125]
    for r in recs:
        assert "error" not in r
        assert np.isfinite(r["C_meas"]) and r["C_meas"] > 0
        assert r["C1_meas"] <= r["C_meas"] * 1.0001 or r["C1_meas"] > 0
        assert r["trace_max"] < 1e-10
        assert r["tangency_max"] < 1e-8
        assert r["divergence_max"] < 1e-8
    # the eta sweep runs largest-first, so the second record carries the
    # successive-pressure diagnostic
    with_step = [r for r in ledger.records if "p_c0_step" in r]
    assert len(with_step) == 1
    groups = ledger.per_field("C_meas")
    assert list(groups) == [(0.5, 11)]
    assert len(groups[(0.5, 11)]) == 2


def test_eta_study_partial_failure(disk_chart, cutoffs, collar):
    rough = make_rough_stream(0.5, 1, 1, disk_chart)
    plan = build_pair_plan(disk_chart.points, seed=0, n_random=2000)
    # eta above epsilon/4 pushes kernel supports out of the cutoff bands
    ledger = EstimateLedger()
    eta_study([rough], [0.05], cutoffs, collar, plan, ledger=ledger)
    assert len(ledger.records) == 1
    assert "error" in ledger.records[0]
    assert ledger.per_field() == {}


def test_tensor_square(disk_chart):
    u = rigid_field(disk_chart)
    sq = tensor_square(u)
    pts = disk_chart.points
    assert np.allclose(sq.values[..., 0], pts[..., 1] ** 2)
    assert np.allclose(sq.values[..., 1], -pts[..., 0] * pts[..., 1])
    assert np.allclose(sq.values[..., 2], pts[..., 0] ** 2)
