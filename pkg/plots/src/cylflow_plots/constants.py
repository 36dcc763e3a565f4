"""Envelope constants refit from a trace, using the verify conventions.

The verification layer estimates each bound's constant over a "late
window": drop the first 10% of records as transient, keep positive times,
and take the last half in log spacing (log t_tilde for the unnormalised
clock, log(1+t) for the normalised one).  These functions reproduce that
arithmetic from the CSV columns; because the CSV round-trips doubles
exactly, a refit matches the producer's summary bit-for-bit.
"""

from __future__ import annotations

import math

import numpy as np

TRANSIENT_DROP = 0.1


def _trimmed_positive(times: np.ndarray) -> np.ndarray:
    start = int(len(times) * TRANSIENT_DROP)
    idx = np.arange(start, len(times))
    return idx[times[idx] > 0]


def _late_half(times: np.ndarray, idx: np.ndarray) -> np.ndarray:
    threshold = math.sqrt(times[idx[0]] * times[idx[-1]])
    return idx[times[idx] >= threshold]


def _late_half_log1p(times: np.ndarray, idx: np.ndarray) -> np.ndarray:
    lt = np.log1p(times[idx])
    threshold = 0.5 * (lt[0] + lt[-1])
    return idx[np.log1p(times[idx]) >= threshold]


def unnormalized_constant(cols) -> tuple[float, np.ndarray]:
    """sup of t_tilde * total curvature over the late window."""
    t = cols["t_tilde"]
    idx = _trimmed_positive(t)
    late = _late_half(t, idx)
    return float(np.max(t[late] * cols["total_R"][late])), late


def normalized_constant(cols) -> tuple[float, np.ndarray]:
    """sup of log(1+t) * r over the trimmed window (late half reported for
    the envelope span)."""
    t = cols["t_norm"]
    idx = _trimmed_positive(t)
    sup = float(np.max(np.log1p(t[idx]) * cols["r_norm"][idx]))
    return sup, _late_half_log1p(t, idx)


def blowup_constant(cols) -> tuple[float, np.ndarray]:
    """inf of R_max / t_tilde over the late window (the linear growth rate)."""
    t = cols["t_tilde"]
    idx = _trimmed_positive(t)
    late = _late_half(t, idx)
    return float(np.min(cols["R_max"][late] / t[late])), late


def nonexponential_offset(cols) -> tuple[float, np.ndarray]:
    """Offset c_hat = -2 / A'(0), finite-differenced over the first two
    records; the bound is 2 / (t + c_hat)."""
    slope = (cols["area"][1] - cols["area"][0]) / (cols["t_tilde"][1] - cols["t_tilde"][0])
    t = cols["t_norm"]
    idx = _trimmed_positive(t)
    return -2.0 / slope, _late_half_log1p(t, idx)


def boundary_length_floor(cols) -> float:
    """Minimum normalised boundary length over the run."""
    return float(np.min(np.minimum(cols["len_minus_norm"], cols["len_plus_norm"])))
