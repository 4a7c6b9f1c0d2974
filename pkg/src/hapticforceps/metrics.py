"""Trajectory distances and error statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import EmptySet, LengthMismatch, NonPositiveMFA


def _pairwise(A, B):
    d = A[:, None, :] - B[None, :, :]
    sq = d[..., 0] * d[..., 0]
    for k in range(1, d.shape[2]):
        sq = sq + d[..., k] * d[..., k]
    return np.sqrt(sq)


def _fsum_mean(a: np.ndarray) -> np.ndarray:
    """Correctly rounded mean along axis 0, independent of summation order."""
    if a.ndim == 1:
        return np.float64(math.fsum(a) / len(a))
    return np.array([math.fsum(col) / len(col) for col in a.T])


def mean_hausdorff(A, B) -> Tuple[float, float]:
    """Mean distance ``d_a`` and Hausdorff distance ``d_h`` between point sets.

    ``d_a`` is the larger of the two directed mean nearest-neighbour
    distances; ``d_h`` the larger of the two directed maxima.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.size == 0 or B.size == 0:
        raise EmptySet("both point sets must be non-empty")
    if A.shape[1] != B.shape[1]:
        raise ValueError("point sets differ in dimension")
    D = _pairwise(A, B)
    a_to_b = D.min(axis=1)
    b_to_a = D.min(axis=0)
    d_a = max(math.fsum(a_to_b) / len(a_to_b), math.fsum(b_to_a) / len(b_to_a))
    d_h = max(float(a_to_b.max()), float(b_to_a.max()))
    return d_a, d_h


@dataclass(frozen=True)
class ErrorStats:
    mean_abs: np.ndarray
    max_abs: np.ndarray
    rms: np.ndarray
    mfa: Optional[np.ndarray] = None
    pct_of_mfa: Optional[dict] = None  # {"mean": .., "max": .., "rms": ..} in percent
    # scalar summaries over per-sample error norms (equal to the above for 1-D data)
    norm_mean: float = 0.0
    norm_max: float = 0.0
    norm_rms: float = 0.0

    def as_dict(self) -> dict:
        """JSON-ready; scalar series give numbers, vector series give lists."""
        plain = lambda v: None if v is None else np.asarray(v, dtype=float).tolist()
        out = {
            "mean_abs": plain(self.mean_abs),
            "max_abs": plain(self.max_abs),
            "rms": plain(self.rms),
            "norm_mean": plain(self.norm_mean),
            "norm_max": plain(self.norm_max),
            "norm_rms": plain(self.norm_rms),
            "mfa": plain(self.mfa),
            "pct_of_mfa": None,
        }
        if self.pct_of_mfa is not None:
            out["pct_of_mfa"] = {k: plain(v) for k, v in self.pct_of_mfa.items()}
        return out


def error_stats(estimated, reference, mfa=None) -> ErrorStats:
    """Absolute mean, maximum and RMS error, optionally as % of the force amplitude.

    ``mfa`` defaults to ``max |reference|`` per component; an all-zero reference
    then yields no percentages. An explicitly passed ``mfa`` must be positive.
    """
    e = np.asarray(estimated, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    if e.shape != r.shape:
        raise LengthMismatch(f"estimated {e.shape} vs reference {r.shape}")
    if e.shape[0] < 1:
        raise LengthMismatch("series are empty")
    err = np.abs(e - r)
    mean_abs = _fsum_mean(err)
    max_abs = err.max(axis=0)
    rms = np.sqrt(_fsum_mean(err * err))
    norms = err if err.ndim == 1 else np.sqrt((err * err).sum(axis=1))
    if mfa is None:
        amp = np.abs(r).max(axis=0)
        use = amp if np.all(amp > 0) else None
    else:
        use = np.broadcast_to(np.asarray(mfa, dtype=np.float64), mean_abs.shape)
        if np.any(use <= 0):
            raise NonPositiveMFA(f"measured force amplitude must be positive, got {mfa}")
    pct = None
    if use is not None:
        pct = {"mean": 100 * mean_abs / use, "max": 100 * max_abs / use, "rms": 100 * rms / use}
    return ErrorStats(mean_abs, max_abs, rms, use, pct, float(_fsum_mean(norms)),
                      float(norms.max()), float(np.sqrt(_fsum_mean(norms * norms))))
