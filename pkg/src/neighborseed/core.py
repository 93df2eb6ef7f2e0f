"""Backend selection for the simulation kernels.

The compiled extension is used when available; set ``NEIGHBORSEED_PURE=1``
to force the pure-Python fallback.  Both backends implement the same
stream contract, so results are identical either way.
"""

from __future__ import annotations

import os

import numpy as np

from . import _purecore

try:
    from . import _fastcore
except ImportError:  # pragma: no cover - build-less environments
    _fastcore = None


def _select():
    if os.environ.get("NEIGHBORSEED_PURE"):
        return _purecore
    return _fastcore if _fastcore is not None else _purecore


def backend_name() -> str:
    return "compiled" if _select() is _fastcore and _fastcore is not None else "pure"


def get_backend(name: str | None = None):
    """Return a kernel module by name ("compiled", "pure", or None = active)."""
    if name is None:
        return _select()
    if name == "pure":
        return _purecore
    if name == "compiled":
        if _fastcore is None:
            raise RuntimeError("compiled backend is not available")
        return _fastcore
    raise ValueError(f"unknown backend {name!r}")


def _as_i32(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int32)


def mc_spread(indptr, targets, probs, seeds, runs, seed, stream, backend=None):
    mod = get_backend(backend)
    return mod.mc_spread(
        np.ascontiguousarray(indptr, dtype=np.int64),
        _as_i32(targets),
        np.ascontiguousarray(probs, dtype=np.float64),
        _as_i32(seeds),
        int(runs),
        int(seed),
        int(stream),
    )


def mc_spread_alloc(indptr, targets, probs, users, accept, runs, seed, stream, backend=None):
    mod = get_backend(backend)
    return mod.mc_spread_alloc(
        np.ascontiguousarray(indptr, dtype=np.int64),
        _as_i32(targets),
        np.ascontiguousarray(probs, dtype=np.float64),
        _as_i32(users),
        np.ascontiguousarray(accept, dtype=np.float64),
        int(runs),
        int(seed),
        int(stream),
    )


def rr_generate(tindptr, tsources, tprobs, theta, n, seed, stream, backend=None):
    mod = get_backend(backend)
    offsets, members = mod.rr_generate(
        np.ascontiguousarray(tindptr, dtype=np.int64),
        _as_i32(tsources),
        np.ascontiguousarray(tprobs, dtype=np.float64),
        int(theta),
        int(n),
        int(seed),
        int(stream),
    )
    return np.asarray(offsets, dtype=np.int64), np.asarray(members, dtype=np.int32)
