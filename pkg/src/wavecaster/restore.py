"""Gap restoration for damaged recordings via Burg linear prediction.

A gap is filled by fitting one autoregressive model on the samples before
the damage and one on the (time-reversed) samples after it, extrapolating
both across the gap, and crossfading the two predictions. Operates on
mono floating-point PCM arrays; decode/encode round-trips are the
operator's concern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ORDER = 32


class RestoreError(ValueError):
    pass


class InsufficientContextError(RestoreError):
    """Not enough valid samples around the gap to fit a model."""


@dataclass(frozen=True)
class ArModel:
    """Autoregressive predictor: x̂[n] = Σ_k coefficients[k−1]·x[n−k]."""

    order: int
    coefficients: np.ndarray
    error_variance: float
    reflection: np.ndarray
    # E_0..E_p; non-increasing on any finite input.
    error_variances: np.ndarray


def burg_coefficients(samples, order: int) -> ArModel:
    """Fit AR coefficients with the Burg recursion.

    Estimates the predictor directly from the observations by minimizing
    the combined forward and backward prediction error; no autocorrelation
    sequence is formed. Requires len(samples) > 2·order and finite input.
    """
    x = np.asarray(samples, dtype=float)
    if order < 1:
        raise RestoreError("order must be >= 1")
    if x.ndim != 1:
        raise RestoreError("samples must be one-dimensional")
    if len(x) <= 2 * order:
        raise InsufficientContextError(
            f"need more than {2 * order} samples for order {order}, got {len(x)}"
        )
    if not np.all(np.isfinite(x)):
        raise RestoreError("samples must be finite")

    n = len(x)
    fwd = x[1:].astype(float)
    bwd = x[:-1].astype(float)
    # Error-filter polynomial [1, a1..am]; prediction coefficients are its
    # negated tail.
    a = np.zeros(order + 1)
    a[0] = 1.0
    energy = float(np.dot(x, x)) / n
    variances = np.empty(order + 1)
    variances[0] = energy
    reflection = np.zeros(order)
    # Below this the residual is machine noise; fitting further stages on
    # it would destabilize the filter, so remaining reflections stay 0.
    floor = (float(np.dot(fwd, fwd) + np.dot(bwd, bwd)) + 1.0) * np.finfo(float).eps ** 2

    for m in range(order):
        den = float(np.dot(fwd, fwd) + np.dot(bwd, bwd))
        if den <= floor:
            variances[m + 1:] = energy
            break
        # den bounds |2·fwd·bwd| (AM-GM), so k lands in [-1, 1] up to rounding
        k = -2.0 * float(np.dot(bwd, fwd)) / den
        k = float(np.clip(k, -1.0, 1.0))
        reflection[m] = k

        prev = a.copy()
        for j in range(1, m + 2):
            a[j] = prev[j] + k * prev[m + 1 - j]

        fwd_prev = fwd
        fwd = fwd + k * bwd
        bwd = bwd + k * fwd_prev

        energy *= 1.0 - k * k
        variances[m + 1] = energy

        fwd = fwd[1:]
        bwd = bwd[:-1]

    return ArModel(
        order=order,
        coefficients=-a[1:],
        error_variance=float(variances[-1]),
        reflection=reflection,
        error_variances=variances,
    )


def extrapolate(model: ArModel, seed, count: int) -> np.ndarray:
    """Continue the filter response: predict `count` samples past `seed`.

    The seed is the last `order` valid samples, oldest first.
    """
    seed = np.asarray(seed, dtype=float)
    if len(seed) < model.order:
        raise InsufficientContextError(
            f"seed needs {model.order} samples, got {len(seed)}"
        )
    # coefficients reversed once so each step is one dot product over the
    # trailing window
    rev = model.coefficients[::-1]
    buf = np.concatenate([seed[-model.order:], np.zeros(count)])
    for i in range(count):
        buf[model.order + i] = float(np.dot(rev, buf[i:i + model.order]))
    return buf[model.order:]


def gap_fill(samples, gap_start: int, gap_len: int, order: int = DEFAULT_ORDER):
    """Repair samples[gap_start : gap_start+gap_len] by AR extrapolation.

    One model is fit on the pre-gap segment and one on the time-reversed
    post-gap segment; their forward and backward extrapolations are
    combined with a linear crossfade whose forward weight ramps 1→0 across
    the gap. Samples outside the gap are returned untouched.
    """
    x = np.asarray(samples, dtype=float)
    if gap_len < 0 or gap_start < 0 or gap_start + gap_len > len(x):
        raise RestoreError("gap lies outside the signal")
    if gap_len == 0:
        return x.copy()

    left = x[:gap_start]
    right = x[gap_start + gap_len:]
    if len(left) <= 2 * order:
        raise InsufficientContextError("not enough samples before the gap")
    if len(right) <= 2 * order:
        raise InsufficientContextError("not enough samples after the gap")

    fwd_model = burg_coefficients(left, order)
    forward = extrapolate(fwd_model, left[-order:], gap_len)

    bwd_model = burg_coefficients(right[::-1], order)
    backward = extrapolate(bwd_model, right[:order][::-1], gap_len)[::-1]

    # Symmetric ramp: never exactly 0/1, so reversing the signal swaps the
    # two prediction roles exactly.
    i = np.arange(gap_len)
    w = 1.0 - (i + 1) / (gap_len + 1)

    out = x.copy()
    out[gap_start:gap_start + gap_len] = w * forward + (1.0 - w) * backward
    return out
