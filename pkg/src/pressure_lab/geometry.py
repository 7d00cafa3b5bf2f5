"""Closed C2 boundary curves, geodesic collar coordinates and cutoff profiles.

Conventions (fixed once, validated by the analytic disk oracles):
  * counterclockwise arc-length parameterization theta in [0, L)
  * tangent tau = x'(theta), interior normal n = (-x2', x1')
  * signed curvature gamma = x1'' x2' - x1' x2''  (gamma = -1 on the unit circle)
  * frame derivatives n' = gamma tau and tau' = -gamma n
"""

from dataclasses import dataclass, field

import numpy as np

from ._fourier import (
    cumulative_from_samples,
    eval_cumulative,
    fourier_diff,
    trig_interp,
)


class GeometryError(ValueError):
    pass


class OutOfCollarError(ValueError):
    """Raised when a point is outside the collar neighborhood of the boundary."""


# ----------------------------------------------------------------------
# curve presets
# ----------------------------------------------------------------------

def _preset_samples(spec, t):
    kind = spec["kind"]
    if kind == "circle":
        r = float(spec["radius"])
        if r <= 0:
            raise GeometryError("circle radius must be positive")
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
    if kind == "ellipse":
        a, b = float(spec["a"]), float(spec["b"])
        if a <= 0 or b <= 0:
            raise GeometryError("ellipse semi-axes must be positive")
        return np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)
    if kind == "star":
        r0 = float(spec.get("r0", 1.0))
        cos_c = np.asarray(spec.get("cos_coeffs", []), dtype=float)
        sin_c = np.asarray(spec.get("sin_coeffs", []), dtype=float)
        r = np.full_like(t, r0)
        for k, c in enumerate(cos_c, start=1):
            r = r + c * np.cos(k * t)
        for k, c in enumerate(sin_c, start=1):
            r = r + c * np.sin(k * t)
        if np.min(r) <= 0:
            raise GeometryError("star radius function must stay positive")
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
    raise GeometryError(f"unknown curve preset {kind!r}")


@dataclass
class BoundaryCurve:
    """Arc-length node table of a closed C2 planar curve with frames."""

    spec: dict
    n_nodes: int
    length: float
    theta: np.ndarray           # (n,) arc-length parameter nodes
    x: np.ndarray               # (n, 2) points
    tau: np.ndarray             # (n, 2) unit tangents
    normal: np.ndarray          # (n, 2) interior normals
    gamma: np.ndarray           # (n,) signed curvature
    arclength_residual: float = 0.0
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    # -- evaluation by trigonometric interpolation of the node tables --

    def point(self, theta):
        return trig_interp(self.x, self.length, np.asarray(theta, dtype=float))

    def tangent(self, theta):
        t = trig_interp(self.tau, self.length, np.asarray(theta, dtype=float))
        return t / np.linalg.norm(t, axis=-1, keepdims=True)

    def interior_normal(self, theta):
        t = self.tangent(theta)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def curvature(self, theta):
        theta = np.asarray(theta, dtype=float) % self.length
        return trig_interp(self.gamma, self.length, theta)

    def node_table_csv(self, path):
        rows = np.column_stack([
            self.theta, self.x[:, 0], self.x[:, 1],
            self.tau[:, 0], self.tau[:, 1],
            self.normal[:, 0], self.normal[:, 1], self.gamma,
        ])
        header = "theta,x1,x2,tau1,tau2,n1,n2,gamma"
        lines = [header]
        for row in rows:
            lines.append(",".join(repr(float(v)) for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def build_curve(spec, n_nodes):
    """Build an arc-length parameterized boundary curve from a preset.

    spec: {"kind": "circle", "radius": R} | {"kind": "ellipse", "a":, "b":}
          | {"kind": "star", "r0":, "cos_coeffs": [...], "sin_coeffs": [...]}
    """
    if n_nodes < 16 or n_nodes % 2:
        raise GeometryError("n_nodes must be even and at least 16")
    m = max(4096, 8 * n_nodes)
    t_fine = 2.0 * np.pi * np.arange(m) / m
    xs = _preset_samples(spec, t_fine)

    # orientation: enforce counterclockwise
    dx = fourier_diff(xs, 2.0 * np.pi, axis=0)
    area2 = np.mean(xs[:, 0] * dx[:, 1] - xs[:, 1] * dx[:, 0])
    if area2 < 0:
        xs = xs[::-1].copy()
        dx = fourier_diff(xs, 2.0 * np.pi, axis=0)

    speed = np.hypot(dx[:, 0], dx[:, 1])
    if np.min(speed) < 1e-12:
        raise GeometryError("degenerate parameterization (vanishing speed)")
    mean_speed, osc = cumulative_from_samples(speed, 2.0 * np.pi)
    length = 2.0 * np.pi * mean_speed

    # invert the cumulative arclength at the uniform arc-length targets
    targets = length * np.arange(n_nodes) / n_nodes
    ell_fine = eval_cumulative(mean_speed, osc, 2.0 * np.pi, t_fine)
    t_nodes = np.interp(targets, ell_fine, t_fine)
    residual = np.inf
    for _ in range(60):
        f = eval_cumulative(mean_speed, osc, 2.0 * np.pi, t_nodes) - targets
        df = trig_interp(speed, 2.0 * np.pi, t_nodes)
        step = f / df
        t_nodes = t_nodes - step
        residual = np.max(np.abs(step))
        if residual < 1e-13:
            break
    if residual > 1e-10:
        raise GeometryError(
            f"arclength reparameterization did not converge (residual {residual:.3e})"
        )

    # node tables; theta-derivatives by chain rule through t(theta)
    x_t = trig_interp(fourier_diff(xs, 2.0 * np.pi, axis=0), 2.0 * np.pi, t_nodes)
    x_tt = trig_interp(fourier_diff(xs, 2.0 * np.pi, order=2, axis=0), 2.0 * np.pi, t_nodes)
    x_nodes = trig_interp(xs, 2.0 * np.pi, t_nodes)
    sigma = np.linalg.norm(x_t, axis=-1)
    sigma_t = np.einsum("ij,ij->i", x_t, x_tt) / sigma
    x_th = x_t / sigma[:, None]
    x_thth = (x_tt * sigma[:, None] - x_t * sigma_t[:, None]) / sigma[:, None] ** 3

    tau = x_th / np.linalg.norm(x_th, axis=-1, keepdims=True)
    normal = np.stack([-tau[:, 1], tau[:, 0]], axis=-1)
    gamma = x_thth[:, 0] * x_th[:, 1] - x_th[:, 0] * x_thth[:, 1]

    arc_resid = float(np.max(np.abs(np.linalg.norm(x_th, axis=-1) - 1.0)))
    if arc_resid > 1e-6:
        raise GeometryError(f"arc-length table residual too large ({arc_resid:.3e})")

    center = x_nodes.mean(axis=0)
    return BoundaryCurve(
        spec=dict(spec), n_nodes=n_nodes, length=length, theta=targets,
        x=x_nodes, tau=tau, normal=normal, gamma=gamma,
        arclength_residual=arc_resid, center=center,
    )


def curvature(curve: BoundaryCurve, theta):
    return curve.curvature(theta)


def reach_estimate(curve: BoundaryCurve, margin=0.5):
    """Maximal admissible collar depth.

    min of margin/max|gamma| (keeps J = 1 + s*gamma positive with slack) and a
    pairwise injectivity bound |x_i - x_j|^2 / (2 (x_j - x_i).n_i) over nodes.
    """
    curv_bound = margin / np.max(np.abs(curve.gamma))
    diff = curve.x[None, :, :] - curve.x[:, None, :]          # (i, j, 2)
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    proj = np.einsum("ijk,ik->ij", diff, curve.normal)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = d2 / (2.0 * np.abs(proj))
    ratio[~np.isfinite(ratio)] = np.inf
    np.fill_diagonal(ratio, np.inf)
    inj_bound = float(np.min(ratio))
    return float(min(curv_bound, inj_bound))


# ----------------------------------------------------------------------
# geodesic collar chart
# ----------------------------------------------------------------------

@dataclass
class GeodesicChart:
    """Collar coordinates (s, theta) with X(s, theta) = x(theta) + s n(theta).

    Grid: s_i = i*delta/n_s for i = 0..n_s (wall row s=0 included),
    theta_j = j*L/n_theta, periodic.
    """

    curve: BoundaryCurve
    delta: float
    n_s: int
    n_theta: int

    def __post_init__(self):
        c = self.curve
        self.s = self.delta * np.arange(self.n_s + 1) / self.n_s
        self.theta = c.length * np.arange(self.n_theta) / self.n_theta
        self.h_s = self.delta / self.n_s
        self.h_theta = c.length / self.n_theta
        self.x_b = c.point(self.theta)
        self.tau_b = c.tangent(self.theta)
        self.n_b = np.stack([-self.tau_b[:, 1], self.tau_b[:, 0]], axis=-1)
        self.gamma_b = c.curvature(self.theta)
        self.J = 1.0 + self.s[:, None] * self.gamma_b[None, :]
        if np.min(self.J) <= 0.0:
            raise GeometryError(
                f"collar depth {self.delta} too large: J reaches {np.min(self.J):.3e}"
            )
        self.X = self.x_b[None, :, :] + self.s[:, None, None] * self.n_b[None, :, :]

    def chart_forward(self, s, theta):
        s = np.asarray(s, dtype=float)
        if np.any(np.abs(s) > self.delta * (1 + 1e-12)):
            raise OutOfCollarError("depth outside [-delta, delta]")
        theta = np.asarray(theta, dtype=float)
        x = self.curve.point(theta)
        n = self.curve.interior_normal(theta)
        return x + s[..., None] * n

    def project_points(self, pts, tol=1e-12, maxiter=60):
        """Closest-point coordinates of an array of points.

        Returns (s, theta, ok) where ok flags points with 0 <= s <= delta.
        Newton iteration on (x - x(theta)).tau(theta) = 0 seeded from the
        nearest node of the boundary table.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = self.curve
        d = pts[:, None, :] - c.x[None, :, :]
        seed_idx = np.argmin(np.einsum("ijk,ijk->ij", d, d), axis=1)
        theta = c.theta[seed_idx]
        for _ in range(maxiter):
            xb = c.point(theta)
            tb = c.tangent(theta)
            nb = np.stack([-tb[..., 1], tb[..., 0]], axis=-1)
            gb = c.curvature(theta)
            rvec = pts - xb
            f = np.einsum("ij,ij->i", rvec, tb)
            fp = -1.0 - gb * np.einsum("ij,ij->i", rvec, nb)
            theta = theta - f / fp
            if np.max(np.abs(f)) < tol:
                break
        xb = c.point(theta)
        tb = c.tangent(theta)
        nb = np.stack([-tb[..., 1], tb[..., 0]], axis=-1)
        resid = np.abs(np.einsum("ij,ij->i", pts - xb, tb))
        if np.max(resid) > 1e-9:
            raise GeometryError(
                f"closest-point Newton residual {np.max(resid):.3e} did not converge"
            )
        s = np.einsum("ij,ij->i", pts - xb, nb)
        theta = theta % c.length
        ok = (s >= -1e-10) & (s <= self.delta + 1e-10)
        return s, theta, ok

    def closest_point(self, x):
        """Scalar closest-point projection; raises outside the collar."""
        s, theta, ok = self.project_points(np.asarray(x, dtype=float)[None, :])
        if not ok[0]:
            raise OutOfCollarError(f"point at signed depth {s[0]:.6g} not in collar")
        return float(s[0]), float(theta[0])


def chart_forward(chart: GeodesicChart, s, theta):
    return chart.chart_forward(s, theta)


def closest_point(chart: GeodesicChart, x):
    return chart.closest_point(x)


# ----------------------------------------------------------------------
# cutoff profiles
# ----------------------------------------------------------------------

def _bump(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _bump_d1(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def _bump_d2(t):
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) * (1.0 / tp**4 - 2.0 / tp**3)
    return out


class SmoothStep:
    """C-infinity transition 0 -> 1 on [a, b] built from exp(-1/t)."""

    def __init__(self, a, b):
        if not b > a:
            raise GeometryError("smoothstep needs b > a")
        self.a = float(a)
        self.b = float(b)
        self.w = float(b - a)

    def _parts(self, s):
        t = np.clip((np.asarray(s, dtype=float) - self.a) / self.w, 0.0, 1.0)
        return t, _bump(t), _bump(1.0 - t)

    def __call__(self, s):
        t, A, B = self._parts(s)
        return A / (A + B)

    def d1(self, s):
        t, A, B = self._parts(s)
        Ap = _bump_d1(t)
        Bp = -_bump_d1(1.0 - t)
        out = (Ap * B - A * Bp) / (A + B) ** 2
        inside = (np.asarray(s, dtype=float) > self.a) & (np.asarray(s, dtype=float) < self.b)
        return np.where(inside, out / self.w, 0.0)

    def d2(self, s):
        t, A, B = self._parts(s)
        Ap = _bump_d1(t)
        Bp = -_bump_d1(1.0 - t)
        App = _bump_d2(t)
        Bpp = _bump_d2(1.0 - t)
        N = Ap * B - A * Bp
        out = (App * B - A * Bpp) / (A + B) ** 2 - 2.0 * N * (Ap + Bp) / (A + B) ** 3
        inside = (np.asarray(s, dtype=float) > self.a) & (np.asarray(s, dtype=float) < self.b)
        return np.where(inside, out / self.w**2, 0.0)


class _Profile:
    """One cutoff profile: plateau value `left` before [a, b], `right` after."""

    def __init__(self, a, b, decreasing):
        self.step = SmoothStep(a, b)
        self.decreasing = decreasing

    def __call__(self, s):
        v = self.step(np.asarray(s, dtype=float))
        return 1.0 - v if self.decreasing else v

    def d1(self, s):
        v = self.step.d1(np.asarray(s, dtype=float))
        return -v if self.decreasing else v

    def d2(self, s):
        v = self.step.d2(np.asarray(s, dtype=float))
        return -v if self.decreasing else v


@dataclass
class CutoffProfile:
    """The profiles phi, phi_b, phi_i of the boundary/interior splitting."""

    delta: float
    epsilon: float
    delta1: float
    delta2: float
    delta3: float

    def __post_init__(self):
        d, e = self.delta, self.epsilon
        d1, d2, d3 = self.delta1, self.delta2, self.delta3
        checks = [
            (0.0 < d1, "0 < delta1"),
            (d1 < d2 - e, "delta1 < delta2 - epsilon"),
            (d2 - e < d3, "delta2 - epsilon < delta3"),
            (d3 < d - 2.0 * e, "delta3 < delta - 2*epsilon"),
            (e > 0.0, "epsilon > 0"),
        ]
        for ok, name in checks:
            if not ok:
                raise GeometryError(f"cutoff parameter chain violated: {name}")
        # phi: 1 on [0, d-e], 0 on [d, inf), non-increasing
        self._phi = _Profile(d - e, d, decreasing=True)
        # phi_b: 1 on [0, d3+e], 0 on [d-e, inf), non-increasing
        self._phi_b = _Profile(d3 + e, d - e, decreasing=True)
        # phi_i: 0 on [0, d1], 1 on [d2-e, inf), non-decreasing
        self._phi_i = _Profile(d1, d2 - e, decreasing=False)

    def phi(self, s):
        return self._phi(s)

    def phi_b(self, s):
        return self._phi_b(s)

    def phi_i(self, s):
        return self._phi_i(s)

    def phi_d1(self, s):
        return self._phi.d1(s)

    def phi_b_d1(self, s):
        return self._phi_b.d1(s)

    def phi_b_d2(self, s):
        return self._phi_b.d2(s)

    def phi_i_d1(self, s):
        return self._phi_i.d1(s)


def build_cutoffs(delta, epsilon, delta1, delta2, delta3):
    return CutoffProfile(delta, epsilon, delta1, delta2, delta3)


def default_cutoffs(delta):
    """Default transition ranges as fixed fractions of the collar depth."""
    return CutoffProfile(
        delta=delta, epsilon=0.125 * delta,
        delta1=0.25 * delta, delta2=0.5 * delta, delta3=0.625 * delta,
    )
