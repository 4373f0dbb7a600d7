"""Hot inner loops with a numba and a pure-numpy implementation.

The numba path is used when numba imports and ``ONTOSIM_DISABLE_NUMBA`` is
unset (or ``0``).  Both paths compute the same values up to round-off; the
benchmark in ``benchmarks/bench_kernels.py`` compares their speed.

``ONTOSIM_THREADS`` caps the number of worker threads used to split a batch
of positions (default: all cores).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "0").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = numba is not None and not _env_flag("ONTOSIM_DISABLE_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"


def max_threads() -> int:
    raw = os.environ.get("ONTOSIM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def guidance_numpy(psi, grads, m_points, origin, spacing, inv_mass, eps, q):
    """Multilinear interpolation of psi and grad psi, then Im(psi* grad psi)/|psi|^2 / m.

    ``psi`` is the flat amplitude array, ``grads`` has shape ``(ndim, size)``
    and ``q`` has shape ``(n, ndim)``.  Returns velocities ``(n, ndim)`` and a
    boolean node mask ``(n,)`` flagging points with interpolated density below ``eps``.
    """
    n, ndim = q.shape
    u = (q - origin) / spacing
    i0 = np.floor(u)
    w = u - i0
    i0 = i0.astype(np.int64) % m_points
    i1 = (i0 + 1) % m_points
    strides = m_points ** np.arange(ndim - 1, -1, -1, dtype=np.int64)
    val = np.zeros(n, dtype=np.complex128)
    grad = np.zeros((ndim, n), dtype=np.complex128)
    for corner in range(1 << ndim):
        weight = np.ones(n)
        flat = np.zeros(n, dtype=np.int64)
        for d in range(ndim):
            if (corner >> d) & 1:
                weight = weight * w[:, d]
                flat += i1[:, d] * strides[d]
            else:
                weight = weight * (1.0 - w[:, d])
                flat += i0[:, d] * strides[d]
        val += weight * psi[flat]
        for d in range(ndim):
            grad[d] += weight * grads[d, flat]
    dens = val.real**2 + val.imag**2
    node = dens < eps
    safe = np.where(node, 1.0, dens)
    v = (np.conj(val) * grad).imag / safe * inv_mass[:, None]
    v[:, node] = 0.0
    return np.ascontiguousarray(v.T), node


if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def _guidance_nb(psi, grads, m_points, origin, spacing, inv_mass, eps, q, v, node):  # pragma: no cover - jitted
        n, ndim = q.shape
        strides = np.empty(ndim, dtype=np.int64)
        s = 1
        for d in range(ndim - 1, -1, -1):
            strides[d] = s
            s *= m_points
        i0 = np.empty(ndim, dtype=np.int64)
        i1 = np.empty(ndim, dtype=np.int64)
        w = np.empty(ndim)
        g = np.empty(ndim, dtype=np.complex128)
        for p in range(n):
            for d in range(ndim):
                u = (q[p, d] - origin) / spacing
                f = np.floor(u)
                w[d] = u - f
                i = np.int64(f) % m_points
                i0[d] = i
                i1[d] = (i + 1) % m_points
            val = 0j
            for d in range(ndim):
                g[d] = 0j
            for corner in range(1 << ndim):
                weight = 1.0
                flat = 0
                for d in range(ndim):
                    if (corner >> d) & 1:
                        weight *= w[d]
                        flat += i1[d] * strides[d]
                    else:
                        weight *= 1.0 - w[d]
                        flat += i0[d] * strides[d]
                val += weight * psi[flat]
                for d in range(ndim):
                    g[d] += weight * grads[d, flat]
            dens = val.real * val.real + val.imag * val.imag
            if dens < eps:
                node[p] = True
                for d in range(ndim):
                    v[p, d] = 0.0
            else:
                node[p] = False
                for d in range(ndim):
                    v[p, d] = (val.real * g[d].imag - val.imag * g[d].real) / dens * inv_mass[d]

    def guidance_numba(psi, grads, m_points, origin, spacing, inv_mass, eps, q):
        n, ndim = q.shape
        v = np.empty((n, ndim))
        node = np.empty(n, dtype=np.bool_)
        _guidance_nb(psi, grads, m_points, float(origin), float(spacing), inv_mass, float(eps), q, v, node)
        return v, node

else:  # pragma: no cover
    guidance_numba = None


_MIN_CHUNK = 4096


def guidance(psi, grads, m_points, origin, spacing, inv_mass, eps, q, backend=None):
    """Dispatch to the selected backend, splitting large batches across threads."""
    backend = backend or BACKEND
    fn = guidance_numba if backend == "numba" else guidance_numpy
    if fn is None:
        raise RuntimeError("numba backend requested but numba is unavailable")
    q = np.ascontiguousarray(q, dtype=float)
    inv_mass = np.ascontiguousarray(inv_mass, dtype=float)
    nthreads = min(max_threads(), len(q) // _MIN_CHUNK)
    if nthreads <= 1:
        return fn(psi, grads, m_points, origin, spacing, inv_mass, eps, q)
    parts = np.array_split(q, nthreads)
    with ThreadPoolExecutor(nthreads) as pool:
        results = list(pool.map(lambda part: fn(psi, grads, m_points, origin, spacing, inv_mass, eps, part), parts))
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])
