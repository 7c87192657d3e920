"""Distance kernels for descriptor vectors and region descriptor sets."""
from __future__ import annotations

import numpy as np

from .regionfeat import RegionFeatureSet

NORMS = ("L1", "L2")


def _check_norm(norm: str) -> str:
    norm = norm.upper()
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")
    return norm


def vector_distance(a, b, norm: str = "L2") -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if _check_norm(norm) == "L1":
        return float(diff.sum())
    return float(np.sqrt(np.dot(diff, diff)))


def distances_to(query, archive, norm: str = "L2") -> np.ndarray:
    """Distance from one vector to every row of ``archive``."""
    query = np.asarray(query, dtype=np.float64)
    archive = np.asarray(archive, dtype=np.float64)
    if archive.ndim != 2 or archive.shape[1] != query.shape[0]:
        raise ValueError(f"dimension mismatch: query {query.shape} vs archive {archive.shape}")
    diff = np.abs(archive - query)
    if _check_norm(norm) == "L1":
        return diff.sum(axis=1)
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def pairwise_l2(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(m, n) matrix of L2 distances between rows of ``x`` and rows of ``y``.

    Uses explicit differences rather than the ``|x|^2 + |y|^2 - 2xy`` expansion
    so identical rows give exactly zero.
    """
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("mnc,mnc->mn", diff, diff))


def _descriptors(f) -> np.ndarray:
    d = f.descriptors if isinstance(f, RegionFeatureSet) else f
    return np.asarray(d, dtype=np.float64)


def region_set_distance(f_q, f_r, symmetric: bool = False) -> float:
    """Mean over query regions of the L2 distance to the nearest archive region.

    The measure is asymmetric and the query set goes first. With
    ``symmetric=True`` the two directions are averaged instead.
    """
    q, r = _descriptors(f_q), _descriptors(f_r)
    if q.ndim != 2 or r.ndim != 2 or q.shape[0] == 0 or r.shape[0] == 0:
        raise ValueError("region sets must be non-empty 2-D descriptor arrays")
    if q.shape[1] != r.shape[1]:
        raise ValueError(f"descriptor dimension mismatch: {q.shape[1]} vs {r.shape[1]}")
    dist = pairwise_l2(q, r)
    forward = float(dist.min(axis=1).mean())
    if not symmetric:
        return forward
    return 0.5 * (forward + float(dist.min(axis=0).mean()))
