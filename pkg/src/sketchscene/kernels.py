"""Numeric hot paths with numba acceleration and a pure-numpy fallback.

Every kernel has two implementations: a numba ``@njit`` loop and a numpy
expression written so each output element goes through the *same*
sequence of IEEE-754 operations.  The two paths are bit-identical, so
the selection flag changes speed, never results.

Selection: numba is used when it imports cleanly and the environment
variable ``SKETCHSCENE_NUMBA`` is not one of ``0/false/off/no``.  The
active path is reported by :data:`BACKEND`.

Full-array reductions (loss means, diagnostics) are deliberately not
kernelized; they run through numpy in both paths so summation order
never depends on the flag.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

_FLAG = os.environ.get("SKETCHSCENE_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in {"0", "false", "off", "no"}

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is an install-time dependency
    _njit = None


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _lincomb_np(x, y, a, b):
    return a * x + b * y


def _mul_add_np(a, z, b):
    return a * z + b


def _ddim_step_np(z, e, s_t, c_t, s_p, c_p):
    return s_p * ((z - c_t * e) / s_t) + c_p * e


def _where_blend_np(bg, fg, m):
    return np.where(m[None, :, :] != 0.0, fg, bg)


def _masked_sq_residual_np(eps, eps_hat, m):
    r = (eps - eps_hat) * m[None, :, :]
    return r * r


def _block_mean_2d_np(x, f):
    h = x.shape[0] // f
    w = x.shape[1] // f
    acc = np.zeros((h, w), dtype=np.float64)
    for dy in range(f):
        for dx in range(f):
            acc += x[dy::f, dx::f]
    return acc * (1.0 / (f * f))


def _block_mean_3d_np(x, f):
    c = x.shape[0]
    h = x.shape[1] // f
    w = x.shape[2] // f
    acc = np.zeros((c, h, w), dtype=np.float64)
    for dy in range(f):
        for dx in range(f):
            acc += x[:, dy::f, dx::f]
    return acc * (1.0 / (f * f))


def _upsample_nn_3d_np(z, f):
    return np.repeat(np.repeat(z, f, axis=1), f, axis=2)


_NUMPY = {
    "lincomb": _lincomb_np,
    "mul_add": _mul_add_np,
    "ddim_step": _ddim_step_np,
    "where_blend": _where_blend_np,
    "masked_sq_residual": _masked_sq_residual_np,
    "block_mean_2d": _block_mean_2d_np,
    "block_mean_3d": _block_mean_3d_np,
    "upsample_nn_3d": _upsample_nn_3d_np,
}


# ---------------------------------------------------------------------------
# numba implementations (same per-element operation order as above)
# ---------------------------------------------------------------------------

def _build_numba():
    jit = _njit(cache=True)

    @jit
    def lincomb(x, y, a, b):
        out = np.empty_like(x)
        xf = x.ravel()
        yf = y.ravel()
        of = out.ravel()
        for i in range(xf.size):
            of[i] = a * xf[i] + b * yf[i]
        return out

    @jit
    def mul_add(a, z, b):
        out = np.empty_like(z)
        af = a.ravel()
        zf = z.ravel()
        bf = b.ravel()
        of = out.ravel()
        for i in range(zf.size):
            of[i] = af[i] * zf[i] + bf[i]
        return out

    @jit
    def ddim_step(z, e, s_t, c_t, s_p, c_p):
        out = np.empty_like(z)
        zf = z.ravel()
        ef = e.ravel()
        of = out.ravel()
        for i in range(zf.size):
            of[i] = s_p * ((zf[i] - c_t * ef[i]) / s_t) + c_p * ef[i]
        return out

    @jit
    def where_blend(bg, fg, m):
        out = np.empty_like(bg)
        for c in range(bg.shape[0]):
            for i in range(bg.shape[1]):
                for j in range(bg.shape[2]):
                    if m[i, j] != 0.0:
                        out[c, i, j] = fg[c, i, j]
                    else:
                        out[c, i, j] = bg[c, i, j]
        return out

    @jit
    def masked_sq_residual(eps, eps_hat, m):
        out = np.empty_like(eps)
        for c in range(eps.shape[0]):
            for i in range(eps.shape[1]):
                for j in range(eps.shape[2]):
                    r = (eps[c, i, j] - eps_hat[c, i, j]) * m[i, j]
                    out[c, i, j] = r * r
        return out

    @jit
    def block_mean_2d(x, f):
        h = x.shape[0] // f
        w = x.shape[1] // f
        out = np.empty((h, w), np.float64)
        inv = 1.0 / (f * f)
        for i in range(h):
            for j in range(w):
                s = 0.0
                for dy in range(f):
                    for dx in range(f):
                        s += x[i * f + dy, j * f + dx]
                out[i, j] = s * inv
        return out

    @jit
    def block_mean_3d(x, f):
        c = x.shape[0]
        h = x.shape[1] // f
        w = x.shape[2] // f
        out = np.empty((c, h, w), np.float64)
        inv = 1.0 / (f * f)
        for k in range(c):
            for i in range(h):
                for j in range(w):
                    s = 0.0
                    for dy in range(f):
                        for dx in range(f):
                            s += x[k, i * f + dy, j * f + dx]
                    out[k, i, j] = s * inv
        return out

    @jit
    def upsample_nn_3d(z, f):
        c = z.shape[0]
        h = z.shape[1]
        w = z.shape[2]
        out = np.empty((c, h * f, w * f), z.dtype)
        for k in range(c):
            for i in range(h * f):
                for j in range(w * f):
                    out[k, i, j] = z[k, i // f, j // f]
        return out

    return {
        "lincomb": lincomb,
        "mul_add": mul_add,
        "ddim_step": ddim_step,
        "where_blend": where_blend,
        "masked_sq_residual": masked_sq_residual,
        "block_mean_2d": block_mean_2d,
        "block_mean_3d": block_mean_3d,
        "upsample_nn_3d": upsample_nn_3d,
    }


_NUMBA = _build_numba() if (_njit is not None and _WANT_NUMBA) else None
_ACTIVE = _NUMBA if _NUMBA is not None else _NUMPY
BACKEND = "numba" if _NUMBA is not None else "numpy"


def _as_c64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# public wrappers (normalize layout/dtype, then dispatch)
# ---------------------------------------------------------------------------

def lincomb(x, y, a, b):
    """``a*x + b*y`` elementwise."""
    return _ACTIVE["lincomb"](_as_c64(x), _as_c64(y), float(a), float(b))


def mul_add(a, z, b):
    """``a*z + b`` elementwise (all arrays, same shape)."""
    return _ACTIVE["mul_add"](_as_c64(a), _as_c64(z), _as_c64(b))


def ddim_step(z, e, s_t, c_t, s_p, c_p):
    """``s_p*((z - c_t*e)/s_t) + c_p*e`` elementwise."""
    return _ACTIVE["ddim_step"](
        _as_c64(z), _as_c64(e), float(s_t), float(c_t), float(s_p), float(c_p)
    )


def where_blend(bg, fg, m):
    """Per-pixel selection: fg where the 2-D mask is nonzero, else bg."""
    return _ACTIVE["where_blend"](_as_c64(bg), _as_c64(fg), _as_c64(m))


def masked_sq_residual(eps, eps_hat, m):
    """``((eps - eps_hat) * m)**2`` elementwise with a 2-D mask."""
    return _ACTIVE["masked_sq_residual"](_as_c64(eps), _as_c64(eps_hat), _as_c64(m))


def block_mean_2d(x, f):
    """Mean over non-overlapping f x f blocks of a 2-D array."""
    return _ACTIVE["block_mean_2d"](_as_c64(x), int(f))


def block_mean_3d(x, f):
    """Mean over non-overlapping f x f blocks per channel of a CHW array."""
    return _ACTIVE["block_mean_3d"](_as_c64(x), int(f))


def upsample_nn_3d(z, f):
    """Nearest-neighbour upsample of a CHW array by integer factor f."""
    return _ACTIVE["upsample_nn_3d"](_as_c64(z), int(f))


def warmup():
    """Precompile all numba kernels (no-op on the numpy path)."""
    if _NUMBA is None:
        return
    z = np.zeros((2, 4, 4), dtype=np.float64)
    m2 = np.zeros((4, 4), dtype=np.float64)
    lincomb(z, z, 0.5, 0.5)
    mul_add(z, z, z)
    ddim_step(z, z, 1.0, 0.0, 1.0, 0.0)
    where_blend(z, z, m2)
    masked_sq_residual(z, z, m2)
    block_mean_2d(m2, 2)
    block_mean_3d(z, 2)
    upsample_nn_3d(z, 2)


def implementations():
    """Both implementation tables, for benchmarks: (numpy, numba_or_None)."""
    return _NUMPY, _NUMBA


def available_paths() -> list[str]:
    return ["numpy", "numba"] if _NUMBA is not None else ["numpy"]


@contextlib.contextmanager
def use(path: str):
    """Temporarily dispatch every wrapper through one implementation
    table.  Benchmarking hook; results are bit-identical either way."""
    global _ACTIVE, BACKEND
    tables = {"numpy": _NUMPY}
    if _NUMBA is not None:
        tables["numba"] = _NUMBA
    if path not in tables:
        raise ValueError(f"kernel path {path!r} unavailable (have {sorted(tables)})")
    prev_active, prev_backend = _ACTIVE, BACKEND
    _ACTIVE, BACKEND = tables[path], path
    try:
        yield
    finally:
        _ACTIVE, BACKEND = prev_active, prev_backend
