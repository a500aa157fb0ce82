"""Backend selection for the hot inner loops.

Prefers the compiled extension ``bayesfilt._core`` and falls back to the
pure-NumPy mirrors in ``bayesfilt._core_py`` when the extension is not
built. Set the environment variable ``BAYESFILT_PURE=1`` before import to
force the fallback (used by the benchmark and for debugging).
"""

import os

if os.environ.get("BAYESFILT_PURE", "") == "1":
    from bayesfilt import _core_py as _impl

    USING_COMPILED = False
else:
    try:
        from bayesfilt import _core as _impl  # type: ignore[attr-defined]

        USING_COMPILED = True
    except ImportError:
        from bayesfilt import _core_py as _impl

        USING_COMPILED = False

pairwise_sqdist = _impl.pairwise_sqdist
exp_quad_gram = _impl.exp_quad_gram
periodic_gram = _impl.periodic_gram
rq_gram = _impl.rq_gram
gauss_loglik = _impl.gauss_loglik
resample_indices = _impl.resample_indices


def backend_name():
    """'compiled' when the Cython core is active, else 'python'."""
    return "compiled" if USING_COMPILED else "python"
