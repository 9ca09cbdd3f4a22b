"""Kernel selection: compiled ``_core`` when importable, else ``_fallback``.

Set ``DETNMF_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("DETNMF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

OPTIMAL = _fallback.OPTIMAL
UNBOUNDED = _fallback.UNBOUNDED
GUARD = _fallback.GUARD


def simplex_loop(T, basis, n_elig, max_pivots, opt_tol, piv_tol):
    return _impl.simplex_loop(T, basis, n_elig, max_pivots, opt_tol, piv_tol)


def hals_update(F, XtG, GtG):
    _impl.hals_update(F, XtG, GtG)


def backends():
    """Mapping of available backend name -> module."""
    out = {"python": _fallback}
    try:
        from . import _core
        out["cython"] = _core
    except ImportError:
        pass
    return out
