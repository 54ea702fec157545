"""Small shared numerical helpers: Hermite tables, high-order stencils,
Richardson-extrapolated derivatives.
"""

from __future__ import annotations

import numpy as np

# 8th-order central first-derivative coefficients for offsets 1..4.
_D1_COEFFS_8 = np.array([4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0])


def hermite_values(nmax: int, t: np.ndarray) -> np.ndarray:
    """Physicists' Hermite polynomials H_0..H_nmax evaluated at t.

    Returns array of shape (nmax+1,) + t.shape.  Uses the stable upward
    recurrence H_{n+1} = 2 t H_n - 2 n H_{n-1}.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty((nmax + 1,) + t.shape, dtype=float)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 2.0 * t
    for n in range(1, nmax):
        out[n + 1] = 2.0 * t * out[n] - 2.0 * n * out[n - 1]
    return out


def derivative_interior_8(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """8th-order central first derivative along `axis`.

    The returned array has the same shape as f; the 4 cells on each end of
    `axis` are filled with NaN (no one-sided closure: callers are expected
    to trim to the interior).
    """
    f = np.asarray(f)
    out = np.full(f.shape, np.nan, dtype=np.result_type(f.dtype, float))
    core = [slice(None)] * f.ndim
    core[axis] = slice(4, f.shape[axis] - 4)
    acc = np.zeros_like(out[tuple(core)])
    for k, c in enumerate(_D1_COEFFS_8, start=1):
        up = [slice(None)] * f.ndim
        dn = [slice(None)] * f.ndim
        up[axis] = slice(4 + k, f.shape[axis] - 4 + k if k < 4 else None)
        dn[axis] = slice(4 - k, f.shape[axis] - 4 - k)
        acc = acc + c * (f[tuple(up)] - f[tuple(dn)])
    out[tuple(core)] = acc / h
    return out


def wirtinger_derivatives(sampler, z0: complex, h: float):
    """(d/dz, d/dzbar) of a complex-valued phase-space sampler at z0.

    Fourth-order central differences in the real and imaginary directions,
    combined into Wirtinger derivatives:
        d/dz    = (d/du - i d/dv) / 2
        d/dzbar = (d/du + i d/dv) / 2
    """
    def d4(direction: complex) -> complex:
        f1 = sampler(z0 + direction * h)
        f_1 = sampler(z0 - direction * h)
        f2 = sampler(z0 + 2 * direction * h)
        f_2 = sampler(z0 - 2 * direction * h)
        return (8.0 * (f1 - f_1) - (f2 - f_2)) / (12.0 * h)

    du = d4(1.0)
    dv = d4(1.0j)
    return 0.5 * (du - 1.0j * dv), 0.5 * (du + 1.0j * dv)
