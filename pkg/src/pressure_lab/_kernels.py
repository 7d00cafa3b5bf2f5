"""Hot kernels: stencil matvecs and pair reductions.

Each kernel has a pure-numpy implementation and, when numba is importable and
PRESSURE_LAB_DISABLE_NUMBA is unset, an @njit twin compiled at import time.
The active implementations are exported as module attributes so callers stay
agnostic; benchmarks/bench_kernels.py compares the two paths.
"""

import os

import numpy as np

_DISABLE = bool(os.environ.get("PRESSURE_LAB_DISABLE_NUMBA"))

try:
    if _DISABLE:
        raise ImportError("disabled by PRESSURE_LAB_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ----------------------------------------------------------------------
# star-chart 5-point stencil (+ pole DOF) matvec
# ----------------------------------------------------------------------
# Unknowns: p[i, j] on the (rho, theta) grid plus a scalar pole value.
# cs[i, j]  couples rows i and i+1 through the rho face between them,
# cp[j]     couples the pole cell to row 0,
# ct[i, j]  couples columns j and j+1 (periodic) within row i.
# A is the negative discrete flux divergence: symmetric positive
# semidefinite with nullspace = constants.


def star_matvec_numpy(p, pole, cs, cp, ct, pole_coupled):
    n_rho = p.shape[0]
    out = np.zeros_like(p)
    # rho-direction fluxes between consecutive rows
    flux = cs * (p[1:] - p[:-1])                       # (n_rho-1, nt)
    out[:-1] -= flux
    out[1:] += flux
    # theta-direction fluxes (periodic)
    tflux = ct * (np.roll(p, -1, axis=1) - p)
    out -= tflux
    out += np.roll(tflux, 1, axis=1)
    if pole_coupled:
        pflux = cp * (p[0] - pole)                     # pole -> row 0
        out[0] += pflux
        out_pole = -float(np.sum(pflux))
    else:
        out_pole = 0.0
    return out, out_pole


@njit(cache=True)
def _star_matvec_numba(p, pole, cs, cp, ct, pole_coupled):  # pragma: no cover
    n_rho, nt = p.shape
    out = np.zeros_like(p)
    for i in range(n_rho - 1):
        for j in range(nt):
            f = cs[i, j] * (p[i + 1, j] - p[i, j])
            out[i, j] -= f
            out[i + 1, j] += f
    for i in range(n_rho):
        for j in range(nt):
            jn = j + 1 if j + 1 < nt else 0
            f = ct[i, j] * (p[i, jn] - p[i, j])
            out[i, j] -= f
            out[i, jn] += f
    out_pole = 0.0
    if pole_coupled:
        for j in range(nt):
            f = cp[j] * (p[0, j] - pole)
            out[0, j] += f
            out_pole -= f
    return out, out_pole


def star_matvec_numba(p, pole, cs, cp, ct, pole_coupled):
    return _star_matvec_numba(p, float(pole), cs, cp, ct, pole_coupled)


# ----------------------------------------------------------------------
# Holder pair reduction
# ----------------------------------------------------------------------


def pair_seminorm_numpy(values, idx_a, idx_b, inv_dist_alpha):
    diff = np.abs(values[idx_a] - values[idx_b])
    if diff.ndim > 1:
        diff = diff.max(axis=tuple(range(1, diff.ndim)))
    return float(np.max(diff * inv_dist_alpha))


@njit(cache=True)
def _pair_seminorm_numba(values, idx_a, idx_b, inv_dist_alpha):  # pragma: no cover
    best = 0.0
    for k in range(idx_a.shape[0]):
        d = abs(values[idx_a[k]] - values[idx_b[k]]) * inv_dist_alpha[k]
        if d > best:
            best = d
    return best


def pair_seminorm_numba(values, idx_a, idx_b, inv_dist_alpha):
    if values.ndim == 1:
        return float(_pair_seminorm_numba(values, idx_a, idx_b, inv_dist_alpha))
    flat = values.reshape(values.shape[0], -1)
    best = 0.0
    for c in range(flat.shape[1]):
        best = max(best, float(_pair_seminorm_numba(
            np.ascontiguousarray(flat[:, c]), idx_a, idx_b, inv_dist_alpha)))
    return best


if HAVE_NUMBA:
    star_matvec = star_matvec_numba
    pair_seminorm = pair_seminorm_numba
else:
    star_matvec = star_matvec_numpy
    pair_seminorm = pair_seminorm_numpy
