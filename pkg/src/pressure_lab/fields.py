"""Fields on the two structured charts and the differential operators on them.

Two charts are used throughout:
  * interior star-shaped chart (rho, theta): x = c + rho*(x(theta) - c),
    rho_i = (i+1)/n_rho (the boundary row rho=1 is on the grid, the pole is
    not; pole values are carried separately when needed);
  * collar chart (s, theta) of the GeodesicChart, s_i = i*delta/n_s.

Vector fields are stored in Cartesian components; collar frame components
(v.n, v.tau) are derived on demand.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from ._fourier import fourier_diff
from .geometry import BoundaryCurve, GeodesicChart, GeometryError

_THETA_PAD = 4


class FieldError(ValueError):
    pass


# ----------------------------------------------------------------------
# interior chart
# ----------------------------------------------------------------------

class InteriorChart:
    """Star-shaped chart x = c + rho*(x(theta)-c) with metric tables."""

    kind = "interior"

    def __init__(self, curve: BoundaryCurve, n_rho, n_theta):
        self.curve = curve
        self.n_rho = int(n_rho)
        self.n_theta = int(n_theta)
        self.h_rho = 1.0 / self.n_rho
        self.h_theta = curve.length / self.n_theta
        self.rho = (np.arange(self.n_rho) + 1.0) * self.h_rho
        self.theta = np.arange(self.n_theta) * self.h_theta
        self.center = curve.center.copy()

        self.v = curve.point(self.theta) - self.center          # (nt, 2)
        self.vt = curve.tangent(self.theta)                     # d v / d theta
        self.w = self.v[:, 0] * self.vt[:, 1] - self.v[:, 1] * self.vt[:, 0]
        if np.min(self.w) <= 0:
            raise GeometryError("chart center does not see a star-shaped boundary")
        self.points = self.center + self.rho[:, None, None] * self.v[None, :, :]
        # gradients of the chart coordinates (used for Cartesian derivatives)
        self.grad_rho = np.stack([self.vt[:, 1], -self.vt[:, 0]], axis=-1) / self.w[:, None]
        self.grad_theta_num = np.stack([-self.v[:, 1], self.v[:, 0]], axis=-1) / self.w[:, None]
        # jacobian rho*w and cell measure tables
        self.jac = self.rho[:, None] * self.w[None, :]

    # -- basic derivatives ------------------------------------------------

    def pole_value(self, values):
        """Field value at the chart center, Richardson-extrapolated from the
        two innermost rings (ring means are even in the ring radius)."""
        return (4.0 * values[0].mean(axis=0) - values[1].mean(axis=0)) / 3.0

    def d_theta(self, values):
        # spectral: theta lines are periodic and all generated fields are
        # band-limited; centered differences here would be amplified by the
        # 1/rho factor near the pole
        return fourier_diff(values, self.curve.length, axis=1)

    def d_rho(self, values, pole=None):
        h = self.h_rho
        out = np.empty_like(values)
        out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
        if pole is None:
            pole = self.pole_value(values)
        out[0] = (values[1] - pole) / (2.0 * h)
        out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
        return out

    def cart_gradient(self, values, pole=None):
        """Cartesian gradient of a scalar sample array; returns (n_rho, nt, 2)."""
        fr = self.d_rho(values, pole=pole)
        ft = self.d_theta(values)
        gtheta = self.grad_theta_num[None, :, :] / self.rho[:, None, None]
        return fr[..., None] * self.grad_rho[None, :, :] + ft[..., None] * gtheta

    def divergence(self, vec, poles=None):
        gx = self.cart_gradient(vec[..., 0], None if poles is None else poles[0])
        gy = self.cart_gradient(vec[..., 1], None if poles is None else poles[1])
        return gx[..., 0] + gy[..., 1]

    def curl(self, vec, poles=None):
        gx = self.cart_gradient(vec[..., 0], None if poles is None else poles[0])
        gy = self.cart_gradient(vec[..., 1], None if poles is None else poles[1])
        return gy[..., 0] - gx[..., 1]

    # -- interpolation ----------------------------------------------------

    def spline(self, values, kx=3, ky=3):
        """Bicubic spline in chart coordinates with periodic theta padding."""
        p = _THETA_PAD
        th = np.concatenate([
            self.theta[-p:] - self.curve.length, self.theta,
            self.theta[:p] + self.curve.length,
        ])
        vals = np.concatenate([values[:, -p:], values, values[:, :p]], axis=1)
        return RectBivariateSpline(self.rho, th, vals, kx=kx, ky=ky)

    def chart_coords(self, pts):
        """(rho, theta) coordinates of physical points (star inversion)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts - self.center
        phi = np.arctan2(rel[:, 1], rel[:, 0])
        node_phi = np.unwrap(np.arctan2(self.v[:, 1], self.v[:, 0]))
        node_phi = node_phi - 2.0 * np.pi * np.floor(node_phi[0] / (2.0 * np.pi))
        order = np.argsort(node_phi)
        phi_mod = (phi - node_phi[order][0]) % (2.0 * np.pi) + node_phi[order][0]
        theta = np.interp(phi_mod, node_phi[order], self.theta[order],
                          period=2.0 * np.pi)
        # Newton refinement of angle(v(theta)) = phi
        for _ in range(4):
            vv = self.curve.point(theta) - self.center
            tt = self.curve.tangent(theta)
            ang = np.arctan2(vv[:, 1], vv[:, 0])
            dang = (vv[:, 0] * tt[:, 1] - vv[:, 1] * tt[:, 0]) / np.einsum("ij,ij->i", vv, vv)
            err = np.arctan2(np.sin(ang - phi), np.cos(ang - phi))
            theta = theta - err / dang
        vv = self.curve.point(theta) - self.center
        rho = np.linalg.norm(rel, axis=1) / np.linalg.norm(vv, axis=1)
        return rho, theta % self.curve.length


# ----------------------------------------------------------------------
# grid fields
# ----------------------------------------------------------------------

@dataclass
class GridField:
    """Samples on one of the two charts; vectors in Cartesian components."""

    chart: object            # InteriorChart or GeodesicChart
    values: np.ndarray       # (n1, n2) scalar or (n1, n2, 2) vector
    pole: object = None      # optional pole value(s) for interior fields

    @property
    def is_vector(self):
        return self.values.ndim == 3

    def copy(self):
        return GridField(self.chart, self.values.copy(), self.pole)


@dataclass
class StreamFunction:
    """Scalar stream function on the interior chart with zero boundary trace."""

    field: GridField
    analytic: object = None   # optional callable psi(pts) for exact evaluation

    def __post_init__(self):
        vals = self.field.values
        if vals.ndim != 2:
            raise FieldError("stream function must be scalar")
        if np.max(np.abs(vals[-1])) > 1e-12:
            raise FieldError("stream function must vanish on the boundary row")


def stream_to_velocity(psi: StreamFunction) -> GridField:
    """u = (-d2 psi, d1 psi) by finite differences through the chart metric."""
    chart = psi.field.chart
    g = chart.cart_gradient(psi.field.values)
    u = np.stack([-g[..., 1], g[..., 0]], axis=-1)
    return GridField(chart, u)


# ----------------------------------------------------------------------
# analytic field families
# ----------------------------------------------------------------------

class RadialFlow:
    """u = V(r) e_theta on a disk; analytic pressure is available."""

    def __init__(self, profile, radius, center=(0.0, 0.0)):
        self.profile = profile
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def velocity(self, pts):
        pts = np.asarray(pts, dtype=float)
        rel = pts - self.center
        r = np.linalg.norm(rel, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, self.profile(r) / np.where(r > 0, r, 1.0), 0.0)
        return np.stack([-rel[..., 1], rel[..., 0]], axis=-1) * scale[..., None]

    def pressure(self, pts, n_quad=2000):
        """Mean-zero pressure from p'(r) = V(r)^2 / r."""
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts - self.center, axis=-1)
        rq = np.linspace(0.0, self.radius, n_quad)
        with np.errstate(invalid="ignore", divide="ignore"):
            integrand = np.where(rq > 0, self.profile(rq) ** 2 / np.where(rq > 0, rq, 1.0), 0.0)
        cumul = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(rq))])
        mean = np.trapezoid(cumul * 2.0 * rq / self.radius**2, rq)
        return np.interp(r, rq, cumul) - mean


def radial_flow(profile, chart: InteriorChart) -> GridField:
    spec = chart.curve.spec
    if spec.get("kind") != "circle":
        raise FieldError("radial_flow requires a disk domain")
    flow = RadialFlow(profile, spec["radius"], chart.center)
    return GridField(chart, flow.velocity(chart.points), pole=np.zeros(2))


class RoughStream:
    """Lacunary stream function with C^{0,alpha}-bounded velocity on a disk.

    psi(x) = beta(x) * sum_j 4^{-j(1+alpha)} sin(4^j k0 (e_j . x) + phase_j),
    with beta = 1 - (r/R)^2 vanishing on the boundary, unit directions e_j and
    phases drawn from the seed.  Closed form, so psi and grad psi are exact.
    """

    base_wavenumber = 1.0

    def __init__(self, alpha, seed, j_max, chart: InteriorChart):
        if not 0.0 < alpha < 1.0:
            raise FieldError("alpha must lie in (0, 1)")
        spec = chart.curve.spec
        if spec.get("kind") != "circle":
            raise FieldError("rough stream generator requires a disk chart")
        self.alpha = float(alpha)
        self.seed = int(seed)
        self.j_max = int(j_max)
        self.chart = chart
        self.radius = float(spec["radius"])
        self.center = chart.center.copy()

        finest = 2.0 * np.pi / (self.base_wavenumber * 4.0**self.j_max)
        cell = max(chart.h_rho * self.radius, chart.h_theta)
        if finest < 4.0 * cell - 1e-12:
            raise FieldError(
                f"finest wavelength {finest:.3g} under-resolved: need >= 4 cells "
                f"({4*cell:.3g}); use a finer grid or smaller j_max"
            )
        rng = np.random.default_rng(self.seed)
        js = np.arange(self.j_max + 1)
        ang = rng.uniform(0.0, 2.0 * np.pi, size=js.size)
        self.dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        self.phases = rng.uniform(0.0, 2.0 * np.pi, size=js.size)
        self.amps = 4.0 ** (-js * (1.0 + self.alpha))
        self.freqs = self.base_wavenumber * 4.0**js

    def _beta(self, rel):
        return 1.0 - (rel[..., 0] ** 2 + rel[..., 1] ** 2) / self.radius**2

    def psi(self, pts):
        pts = np.asarray(pts, dtype=float)
        rel = pts - self.center
        phase = np.tensordot(rel, (self.freqs[:, None] * self.dirs).T, axes=1) + self.phases
        series = np.sum(self.amps * np.sin(phase), axis=-1)
        return self._beta(rel) * series

    def grad_psi(self, pts):
        pts = np.asarray(pts, dtype=float)
        rel = pts - self.center
        kvec = self.freqs[:, None] * self.dirs                      # (J, 2)
        phase = np.tensordot(rel, kvec.T, axes=1) + self.phases
        series = np.sum(self.amps * np.sin(phase), axis=-1)
        dseries = np.tensordot(self.amps * np.cos(phase), kvec, axes=1)
        beta = self._beta(rel)
        dbeta = -2.0 * rel / self.radius**2
        return dbeta * series[..., None] + beta[..., None] * dseries

    def velocity(self, pts):
        g = self.grad_psi(pts)
        return np.stack([-g[..., 1], g[..., 0]], axis=-1)

    def stream_field(self) -> StreamFunction:
        vals = self.psi(self.chart.points)
        vals[-1] = 0.0       # boundary trace is exactly zero (beta vanishes)
        return StreamFunction(GridField(self.chart, vals), analytic=self.psi)

    def velocity_field(self) -> GridField:
        return GridField(self.chart, self.velocity(self.chart.points),
                         pole=self.velocity(self.center[None, :])[0])


def make_rough_stream(alpha, seed, j_max, chart) -> RoughStream:
    return RoughStream(alpha, seed, j_max, chart)


# ----------------------------------------------------------------------
# collar operators (formulas in geodesic coordinates)
# ----------------------------------------------------------------------

def collar_components(u, chart: GeodesicChart):
    """Frame components (u.n, u.tau) tabulated on the collar grid.

    u may be a GridField on any chart (sampled via its evaluator) or a
    callable pts -> (..., 2).
    """
    pts = chart.X.reshape(-1, 2)
    if callable(u):
        vals = u(pts)
    elif isinstance(u, GridField) and isinstance(u.chart, GeodesicChart):
        vals = u.values.reshape(-1, 2)
    elif isinstance(u, GridField):
        sx = u.chart.spline(u.values[..., 0])
        sy = u.chart.spline(u.values[..., 1])
        rho, th = u.chart.chart_coords(pts)
        vals = np.stack([sx(rho, th, grid=False), sy(rho, th, grid=False)], axis=-1)
    else:
        raise FieldError("unsupported velocity representation")
    vals = vals.reshape(chart.n_s + 1, chart.n_theta, 2)
    un = np.einsum("ijk,jk->ij", vals, chart.n_b)
    ut = np.einsum("ijk,jk->ij", vals, chart.tau_b)
    return un, ut


def _d_s(chart: GeodesicChart, q):
    h = chart.h_s
    out = np.empty_like(q)
    out[1:-1] = (q[2:] - q[:-2]) / (2.0 * h)
    out[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h)
    out[-1] = (3.0 * q[-1] - 4.0 * q[-2] + q[-3]) / (2.0 * h)
    return out


def _d_theta(chart: GeodesicChart, q):
    return (np.roll(q, -1, axis=1) - np.roll(q, 1, axis=1)) / (2.0 * chart.h_theta)


def divergence_collar(v: GridField, chart: GeodesicChart = None):
    """(1/J)(d_s(J (v.n)) + d_theta(v.tau)) by centered differences."""
    chart = chart or v.chart
    vn, vt = collar_components(v if not isinstance(v, GridField) else v, chart)
    return (_d_s(chart, chart.J * vn) + _d_theta(chart, vt)) / chart.J


def curl_collar(v: GridField, chart: GeodesicChart = None):
    """(1/J)(d_s(J (v.tau)) - d_theta(v.n))."""
    chart = chart or v.chart
    vn, vt = collar_components(v, chart)
    return (_d_s(chart, chart.J * vt) - _d_theta(chart, vn)) / chart.J


def laplacian_collar(q, chart: GeodesicChart):
    """(1/J) d_s(J d_s q) + (1/J) d_theta((1/J) d_theta q), conservative."""
    q = np.asarray(q, dtype=float)
    h = chart.h_s
    J = chart.J
    out = np.empty_like(q)
    Jh = 0.5 * (J[1:] + J[:-1])                   # J at s half nodes
    flux = Jh * (q[1:] - q[:-1]) / h
    out[1:-1] = (flux[1:] - flux[:-1]) / h
    # one-sided expanded form at the wall rows: q_ss + (gamma/J) q_s
    gam = chart.gamma_b[None, :]
    q_s = _d_s(chart, q)
    for idx in (0, -1):
        if idx == 0:
            q_ss = (2.0 * q[0] - 5.0 * q[1] + 4.0 * q[2] - q[3]) / h**2
        else:
            q_ss = (2.0 * q[-1] - 5.0 * q[-2] + 4.0 * q[-3] - q[-4]) / h**2
        out[idx] = (q_ss + gam[0] / J[idx] * q_s[idx]) * J[idx]
    out /= J
    qt = _d_theta(chart, q)
    out += _d_theta(chart, qt / J) / J
    return out


# ----------------------------------------------------------------------
# interior-chart second-divergence right-hand side
# ----------------------------------------------------------------------

def rhs_double_divergence(u: GridField):
    """Discrete (grad x grad):(u x u) as a composition of two divergences."""
    chart = u.chart
    uv = u.values
    T11, T12, T22 = uv[..., 0] ** 2, uv[..., 0] * uv[..., 1], uv[..., 1] ** 2
    m1 = chart.cart_gradient(T11)[..., 0] + chart.cart_gradient(T12)[..., 1]
    m2 = chart.cart_gradient(T12)[..., 0] + chart.cart_gradient(T22)[..., 1]
    return chart.cart_gradient(m1)[..., 0] + chart.cart_gradient(m2)[..., 1]


def hessian_identity_rhs(psi: StreamFunction):
    """2(psi_12^2 - psi_11 psi_22) for u = grad^perp psi (cross-check route)."""
    chart = psi.field.chart
    g = chart.cart_gradient(psi.field.values)
    g1, g2 = g[..., 0], g[..., 1]
    g11 = chart.cart_gradient(g1)
    g22 = chart.cart_gradient(g2)
    return 2.0 * (g11[..., 1] * g22[..., 0] - g11[..., 0] * g22[..., 1])
