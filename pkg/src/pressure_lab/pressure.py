"""Pressure pipeline: the Neumann pressure solve, the adjusted pressure and
its interior/boundary decomposition, collar flux identities, the slab split
with its Green-term functionals, boundary traces, and the eta sweep study.

Sign conventions (validated by the rigid-rotation oracle): interior normal,
gamma < 0 on convex boundaries, and Neumann data d_n p = gamma (u.tau)^2 on
the wall; the adjusted pressure P = p + phi(d) (u.n)^2 makes that normal
derivative well defined for rough velocities.
"""

from dataclasses import dataclass, field

import numpy as np

from .fields import (GridField, InteriorChart, collar_components,
                     rhs_double_divergence, _d_s, _d_theta)
from .geometry import CutoffProfile, GeodesicChart
from .elliptic import LinearSolveReport, SlabOperator, solve_neumann
from .mollify import (RegularizedVelocity, _chart_collar_frame,
                      boundary_depth)
from .norms import h_minus2_norm, holder_norm, c0_distance


class PressureError(RuntimeError):
    pass


# ----------------------------------------------------------------------
# pressure solve and adjusted pressure
# ----------------------------------------------------------------------

@dataclass
class PressureSolution:
    p: GridField
    P: GridField
    P_i: GridField
    P_b: GridField
    normal_sq: np.ndarray           # (u.n)^2 at the chart nodes
    phi: np.ndarray                 # phi(depth) at the chart nodes
    boundary_tangential: np.ndarray
    report: LinearSolveReport
    eta: object = "unmollified"
    source_id: str = ""

    def check_invariants(self):
        """Grid-exact algebraic identities of the splitting."""
        return {
            "adjustment": float(np.max(np.abs(
                self.P.values - self.p.values - self.phi * self.normal_sq))),
            "boundary_support": float(np.max(np.abs(self.P_b.values[0]))),
        }


def solve_pressure(u, chart: InteriorChart = None, collar: GeodesicChart = None,
                   cutoffs: CutoffProfile = None, tol=1e-10, tangency_tol=1e-6,
                   eta="unmollified", source_id=""):
    """-Delta p = div div (u x u), d_n p = gamma (u.tau)^2, mean(p) = 0,
    then P = p + phi(depth) (u.n)^2 with its interior/boundary pieces.

    u: vector GridField on the interior chart, or a RegularizedVelocity.
    """
    if isinstance(u, RegularizedVelocity):
        ut_b = u.boundary_tangential
        un = u.normal_component
        ufield = u.u_eta
        eta = u.eta
    else:
        ufield = u
        s, th, tau, nrm, gam_nodes = _chart_collar_frame(u.chart, collar)
        un = np.einsum("ijk,ijk->ij", u.values, nrm)
        ut_b = np.einsum("jk,jk->j", u.values[-1], tau[-1])
        tang = float(np.max(np.abs(un[-1])))
        if tang > tangency_tol:
            raise PressureError(f"velocity is not tangential: |u.n| = "
                                f"{tang:.3e} on the boundary")
    chart = chart or ufield.chart
    gam = chart.curve.curvature(chart.theta)
    f = rhs_double_divergence(ufield)
    g = gam * ut_b**2
    p, report = solve_neumann(GridField(chart, f), g, chart, mean_target=0.0,
                              tol=tol)

    depth = boundary_depth(chart)
    phi = cutoffs.phi(depth)
    normal_sq = un**2
    P_vals = p.values + phi * normal_sq
    # the pole lies deeper than the collar on every supported chart, so the
    # adjustment phi * (u.n)^2 vanishes there and the pole value carries over
    P = GridField(chart, P_vals, pole=p.pole)
    P_i = GridField(chart, cutoffs.phi_i(depth) * P_vals, pole=p.pole)
    P_b = GridField(chart, cutoffs.phi_b(depth) * P_vals)
    return PressureSolution(p=p, P=P, P_i=P_i, P_b=P_b, normal_sq=normal_sq,
                            phi=phi, boundary_tangential=ut_b, report=report,
                            eta=eta, source_id=source_id)


# ----------------------------------------------------------------------
# collar identities
# ----------------------------------------------------------------------

def _collar_resample(fieldv: GridField, collar: GeodesicChart):
    """Interior-chart scalar resampled onto the collar grid."""
    sp = fieldv.chart.spline(fieldv.values)
    rho, th = fieldv.chart.chart_coords(collar.X.reshape(-1, 2))
    vals = sp(np.clip(rho, 0.0, 1.0), th, grid=False)
    return vals.reshape(collar.X.shape[:2])


def _reste_term(un, ut, collar):
    """First-order remainder of the geodesic flux identity:

        R_b = (gamma/J) d_s((u.n)^2 - (u.tau)^2)
            + (2/J) d_theta((gamma/J) (u.n)(u.tau)).

    The factor 2 on the theta term follows from the frame derivatives
    n' = gamma tau, tau' = -gamma n; verified symbolically against the
    Cartesian double divergence on the disk.
    """
    J = collar.J
    gam = collar.gamma_b[None, :]
    return (gam / J) * _d_s(collar, un**2 - ut**2) \
        + 2.0 * _d_theta(collar, (gam / J) * un * ut) / J


def collar_flux_residual(u, chart_rhs, collar: GeodesicChart):
    """Pointwise defect between the double divergence of u x u and its
    geodesic-coordinate flux expression on the collar.

    u: callable or GridField.  chart_rhs: the double-divergence reference,
    either a GridField on the interior chart (resampled here) or a callable
    of physical points (analytic reference, the clean choice for refinement
    studies).  Edge rows of the collar use one-sided stencils and should be
    excluded from refinement measurements.
    """
    un, ut = collar_components(u, collar)
    J = collar.J
    geodesic = (_d_s(collar, J * _d_s(collar, un**2))
                + 2.0 * _d_s(collar, _d_theta(collar, un * ut))
                + _d_theta(collar, _d_theta(collar, ut**2) / J)) / J \
        + _reste_term(un, ut, collar)
    if callable(chart_rhs):
        lhs = np.asarray(chart_rhs(collar.X), dtype=float)
    else:
        lhs = _collar_resample(chart_rhs, collar)
    return lhs - geodesic


def sanss2_rhs(u, P_collar, cutoffs: CutoffProfile, collar: GeodesicChart):
    """Right-hand side of the no-second-s-derivative identity for the
    boundary piece phi_b P.

    Returns (values, audit); the audit tracks the highest order of
    s-differentiation applied to velocity- or pressure-derived samples
    during assembly (it must be one: the mixed d_s d_theta term only).
    """
    un, ut = collar_components(u, collar)
    P_collar = np.asarray(P_collar, dtype=float)
    J = collar.J
    gam = collar.gamma_b[None, :]
    s = collar.s[:, None]
    phi_b = cutoffs.phi_b(s)
    dphi_b = cutoffs.phi_b_d1(s)
    d2phi_b = cutoffs.phi_b_d2(s)

    audit = {"s_orders": []}

    def ds(values, order_in):
        audit["s_orders"].append(order_in + 1)
        return _d_s(collar, values)

    # braces: only first-order s-derivatives of velocity products appear
    braces = _d_theta(collar, _d_theta(collar, ut**2) / J)
    braces = braces + 2.0 * ds(_d_theta(collar, un * ut), 0)
    reste = (gam / J) * ds(un**2 - ut**2, 0) \
        + 2.0 * _d_theta(collar, (gam / J) * un * ut) / J
    braces = braces + J * reste
    braces = braces - _d_theta(collar, _d_theta(collar, un**2) / J)

    dP = ds(P_collar, 0)
    values = (phi_b / J) * braces \
        - (d2phi_b * P_collar + 2.0 * dphi_b * dP + (gam / J) * P_collar * dphi_b)
    max_order = max(audit["s_orders"])
    return values, {"max_s_derivative_order": max_order,
                    "second_s_derivative_free": max_order <= 1}


# ----------------------------------------------------------------------
# boundary-piece split and Green-term functionals
# ----------------------------------------------------------------------

@dataclass
class SplitPb:
    P_bb: np.ndarray                 # harmonic piece carrying the wall data
    P_bi: np.ndarray                 # slab-source piece
    target: np.ndarray               # phi_b(s) P on the collar grid
    probes: list                     # [(i, j), ...]
    I1: np.ndarray
    I2i: np.ndarray
    I2b: np.ndarray
    I3: np.ndarray
    P_bi_at_probes: np.ndarray
    audit: dict

    @property
    def reconstruction_error(self):
        return float(np.max(np.abs(self.P_bb + self.P_bi - self.target)))

    @property
    def green_sum_error(self):
        total = self.I1 + self.I2i + self.I2b + self.I3
        return float(np.max(np.abs(total - self.P_bi_at_probes)))


def split_Pb(u, P_collar, cutoffs: CutoffProfile, collar: GeodesicChart,
             n_probes=10, seed=0, tol=1e-12):
    """Decompose phi_b P into the wall-data piece plus the slab-source piece
    and evaluate the Green-term functionals at seeded probe points."""
    un, ut = collar_components(u, collar)
    P_collar = np.asarray(P_collar, dtype=float)
    op = SlabOperator(collar)
    gam = collar.gamma_b
    g_wall = gam * ut[0] ** 2
    ns, nt = collar.n_s, collar.n_theta

    b_bb = op.rhs_from_source(np.zeros((ns + 1, nt)), neumann=g_wall)
    P_bb, _ = op.solve(b_bb, tol=tol)

    rhs_vals, audit = sanss2_rhs(u, P_collar, cutoffs, collar)
    P_bi, _ = op.solve(op.rhs_from_source(rhs_vals), tol=tol)

    s = collar.s[:, None]
    target = cutoffs.phi_b(s) * P_collar

    # pieces of the slab source, in the quadrature normalization
    # f_total * J = phi_b * (A + B - C) + phi_b * (J R_b) - J * D
    J = collar.J
    phi_b = cutoffs.phi_b(s)
    dphi_b = cutoffs.phi_b_d1(s)
    d2phi_b = cutoffs.phi_b_d2(s)
    A = _d_theta(collar, _d_theta(collar, ut**2) / J)
    B = 2.0 * _d_s(collar, _d_theta(collar, un * ut))
    C = _d_theta(collar, _d_theta(collar, un**2) / J)
    D = d2phi_b * P_collar + 2.0 * dphi_b * _d_s(collar, P_collar) \
        + (collar.gamma_b[None, :] / J) * P_collar * dphi_b

    rng = np.random.default_rng(seed)
    i_lo, i_hi = max(1, ns // 5), max(2, (3 * ns) // 5)
    probes = [(int(rng.integers(i_lo, i_hi)), int(rng.integers(0, nt)))
              for _ in range(n_probes)]

    vol = op.vol                      # height * h_theta, rows 0..ns-1
    rows = slice(0, ns)
    I1 = np.empty(n_probes)
    I2i = np.empty(n_probes)
    I2b = np.empty(n_probes)
    I3 = np.empty(n_probes)
    at_probes = np.empty(n_probes)
    gam_row = collar.gamma_b[None, :]
    for k, (i0, j0) in enumerate(probes):
        G = op.green_column(i0, j0, tol=tol)       # (ns+1, nt), zero last row
        Gr = G[rows]
        I1[k] = float(np.sum(Gr * (phi_b * (A + B - C))[rows] * vol))
        # integration by parts in s' and theta' of the first-order terms
        dsG = _d_s(collar, gam_row * cutoffs.phi_b(collar.s)[:, None] * G)
        dtG = _d_theta(collar, cutoffs.phi_b(collar.s)[:, None] * G)
        I2i[k] = float(-np.sum(dsG[rows] * (un**2 - ut**2)[rows] * vol)
                       - 2.0 * np.sum(dtG[rows] * ((gam_row / J) * un * ut)[rows] * vol))
        I2b[k] = float(np.sum(gam * G[0] * ut[0] ** 2 * collar.h_theta))
        I3[k] = float(-np.sum(Gr * (J * D)[rows] * vol))
        at_probes[k] = P_bi[i0, j0]
    return SplitPb(P_bb=P_bb, P_bi=P_bi, target=target, probes=probes,
                   I1=I1, I2i=I2i, I2b=I2b, I3=I3,
                   P_bi_at_probes=at_probes, audit=audit)


# ----------------------------------------------------------------------
# boundary trace
# ----------------------------------------------------------------------

@dataclass
class TraceCurve:
    s: np.ndarray                    # sampled depths, decreasing toward 0
    distances: np.ndarray            # H^-2 distance to gamma (u.tau)^2 per s
    wall_value: np.ndarray           # extrapolated d_s P(0, .)
    wall_distance: float
    slope: float                     # LSQ slope of distance vs sample index
                                     # (s decreasing): negative = improving

    def as_rows(self):
        return [(float(si), float(di)) for si, di in zip(self.s, self.distances)]


def boundary_trace(P_collar, u, collar: GeodesicChart, s_indices=None):
    """d_s P(s, .) against the wall target gamma (u.tau)^2(0, .) in H^-2."""
    P_collar = np.asarray(P_collar, dtype=float)
    un, ut = collar_components(u, collar)
    target = collar.gamma_b * ut[0] ** 2
    dP = _d_s(collar, P_collar)
    if s_indices is None:
        s_indices = [4, 2, 1]        # depths 4h, 2h, h toward the wall
    L = collar.curve.length
    dists = np.array([h_minus2_norm(dP[i] - target, L).value
                      for i in s_indices])
    svals = collar.s[np.asarray(s_indices)]
    wall = 2.0 * dP[1] - dP[2]       # second-order extrapolation to s = 0
    wall_distance = h_minus2_norm(wall - target, L).value
    slope = (float(np.polyfit(np.arange(len(dists)), dists, 1)[0])
             if len(dists) > 1 else 0.0)
    return TraceCurve(s=svals, distances=dists, wall_value=wall,
                      wall_distance=float(wall_distance), slope=slope)


def bc_equivalence_check(p: GridField, u, collar: GeodesicChart):
    """sup_theta |d_s(p + (u.n)^2)(0, .) - gamma (u.tau)^2(0, .)|, with a
    second-order one-sided wall stencil."""
    un, ut = collar_components(u, collar)
    q = _collar_resample(p, collar) + un**2
    h = collar.h_s
    dq0 = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h)
    target = collar.gamma_b * ut[0] ** 2
    return float(np.max(np.abs(dq0 - target)))


# ----------------------------------------------------------------------
# eta study
# ----------------------------------------------------------------------

@dataclass
class EstimateLedger:
    records: list = field(default_factory=list)

    def append(self, rec):
        self.records.append(rec)

    def sorted_records(self):
        return sorted(self.records,
                      key=lambda r: (r.get("alpha", 0.0), r.get("seed", 0),
                                     r.get("eta", 0.0)))

    def per_field(self, key="C_meas"):
        """Group key values by (alpha, seed)."""
        groups = {}
        for r in self.sorted_records():
            if "error" in r:
                continue
            groups.setdefault((r["alpha"], r["seed"]), []).append(r[key])
        return groups


def tensor_square(u: GridField) -> GridField:
    uv = u.values
    comps = np.stack([uv[..., 0] ** 2, uv[..., 0] * uv[..., 1],
                      uv[..., 1] ** 2], axis=-1)
    return GridField(u.chart, comps)


def eta_study_record(rough, eta, cutoffs, collar, plan, prev_p=None,
                     mollify_kwargs=None):
    """One (field, eta) run: mollify, solve, measure.  Returns the ledger
    record plus the pressure samples (for the successive-eta C0 diagnostic).
    """
    from .mollify import mollify_velocity
    chart = rough.chart
    rv = mollify_velocity(rough.velocity_field(), eta, cutoffs, collar,
                          psi=rough.stream_field(), **(mollify_kwargs or {}))
    sol = solve_pressure(rv, chart=chart, collar=collar, cutoffs=cutoffs,
                         source_id=f"rough(alpha={rough.alpha},seed={rough.seed})")
    alpha = rough.alpha
    uu = holder_norm(tensor_square(rv.u_eta), alpha, plan)
    hp = holder_norm(sol.p, alpha, plan)
    hP = holder_norm(sol.P, alpha, plan)
    sup_P = float(np.max(np.abs(sol.P.values)))
    rec = {
        "alpha": float(alpha), "seed": int(rough.seed), "eta": float(eta),
        "n_rho": chart.n_rho, "n_theta": chart.n_theta,
        "uu_holder": uu.norm, "p_holder": hp.norm, "P_holder": hP.norm,
        "P_sup": sup_P,
        "C_meas": hP.norm / uu.norm if uu.norm > 0 else float("nan"),
        "C1_meas": sup_P / uu.norm if uu.norm > 0 else float("nan"),
        "plan_seed": plan.seed, "pair_count": plan.n_pairs,
        "solver_iterations": sol.report.iterations,
        "trace_max": rv.trace_max, "tangency_max": rv.tangency_max,
        "divergence_max": rv.divergence_max,
    }
    if uu.norm == 0.0:
        rec["degenerate"] = True
    if prev_p is not None:
        rec["p_c0_step"] = c0_distance(sol.p.values, prev_p)
    return rec, sol.p.values


def eta_study(rough_fields, etas, cutoffs, collar, plan,
              ledger: EstimateLedger = None, mollify_kwargs=None):
    """Sweep eta over each rough field; failed runs are recorded with their
    error string and the sweep continues."""
    ledger = ledger or EstimateLedger()
    for rough in rough_fields:
        prev = None
        for eta in sorted(etas, reverse=True):
            try:
                rec, prev = eta_study_record(rough, eta, cutoffs, collar,
                                             plan, prev_p=prev,
                                             mollify_kwargs=mollify_kwargs)
            except Exception as exc:   # partial-failure policy
                rec = {"alpha": float(rough.alpha), "seed": int(rough.seed),
                       "eta": float(eta), "error": str(exc)}
            ledger.append(rec)
    return ledger
