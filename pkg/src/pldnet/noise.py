"""Stationary noise PSD tracking via minima-controlled recursive averaging.

One tracker per microphone channel. Each frame the periodogram is smoothed,
spectral minima are tracked over a ring of sub-windows, and the noise estimate
is recursively updated only in bins judged speech-free (smoothed power close
to the tracked minimum).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import InvalidInput


@dataclass(frozen=True)
class NoiseTrackerParams:
    alpha_s: float = 0.8  # periodogram smoothing
    alpha_d: float = 0.95  # noise recursive-update factor
    sub_window_len: int = 15  # frames per minimum sub-window (V)
    num_sub_windows: int = 8  # ring size (U); U*V ~ 2 s at 16 ms hop
    bias_comp: float = 1.5  # multiplicative minimum-statistics bias factor
    lambda_floor: float = 1e-10

    def __post_init__(self):
        if not (0.0 < self.alpha_s < 1.0 and 0.0 < self.alpha_d < 1.0):
            raise InvalidInput("smoothing factors must lie in (0, 1)")
        if self.sub_window_len < 1 or self.num_sub_windows < 1:
            raise InvalidInput("sub-window geometry must be positive")
        if self.bias_comp < 1.0 or self.lambda_floor <= 0.0:
            raise InvalidInput("bias_comp must be >= 1 and lambda_floor > 0")


@dataclass
class NoiseTrackerState:
    smoothed_psd: np.ndarray
    running_min: np.ndarray
    min_buffer: np.ndarray  # [num_sub_windows, F] completed sub-window minima
    sub_min: np.ndarray  # minimum inside the current (partial) sub-window
    lam: np.ndarray  # current noise PSD estimate
    frame_count: int
    filled_sub_windows: int
    params: NoiseTrackerParams = field(default_factory=NoiseTrackerParams)

    def copy(self) -> "NoiseTrackerState":
        return NoiseTrackerState(
            self.smoothed_psd.copy(),
            self.running_min.copy(),
            self.min_buffer.copy(),
            self.sub_min.copy(),
            self.lam.copy(),
            self.frame_count,
            self.filled_sub_windows,
            self.params,
        )


def init_tracker(first_frames, params: NoiseTrackerParams = None) -> NoiseTrackerState:
    """Seed the tracker with the mean periodogram of the supplied frames."""
    params = params or NoiseTrackerParams()
    frames = np.atleast_2d(np.asarray(first_frames, dtype=np.float64))
    if frames.size == 0:
        raise InvalidInput("need at least one frame to initialize the noise tracker")
    if np.any(frames < 0) or not np.all(np.isfinite(frames)):
        raise InvalidInput("frame powers must be finite and non-negative")
    lam = np.maximum(frames.mean(axis=0), params.lambda_floor)
    smoothed = lam.copy()
    n_bins = lam.shape[0]
    return NoiseTrackerState(
        smoothed_psd=smoothed,
        running_min=smoothed.copy(),
        min_buffer=np.full((params.num_sub_windows, n_bins), np.inf),
        sub_min=smoothed.copy(),
        lam=lam,
        frame_count=0,
        filled_sub_windows=0,
        params=params,
    )


def update_tracker(state: NoiseTrackerState, frame_power: np.ndarray):
    """Advance the tracker by one frame; returns (new_state, lambda).

    Strictly causal: only the incoming frame and stored state are used.
    """
    p = state.params
    frame_power = np.asarray(frame_power, dtype=np.float64)
    if np.any(frame_power < 0) or not np.all(np.isfinite(frame_power)):
        raise InvalidInput("frame power must be finite and non-negative")

    st = state.copy()
    st.smoothed_psd = p.alpha_s * st.smoothed_psd + (1.0 - p.alpha_s) * frame_power
    st.sub_min = np.minimum(st.sub_min, st.smoothed_psd)
    st.frame_count += 1

    if st.frame_count % p.sub_window_len == 0:
        # Close the sub-window: push its minimum into the ring.
        slot = (st.frame_count // p.sub_window_len - 1) % p.num_sub_windows
        st.min_buffer[slot] = st.sub_min
        st.filled_sub_windows = min(st.filled_sub_windows + 1, p.num_sub_windows)
        st.sub_min = st.smoothed_psd.copy()

    if st.filled_sub_windows > 0:
        st.running_min = np.minimum(st.min_buffer.min(axis=0), st.sub_min)
    else:
        st.running_min = st.sub_min.copy()
    st.running_min = np.minimum(st.running_min, st.smoothed_psd)

    # Gated recursive averaging: update only where no speech is indicated.
    speech_absent = st.smoothed_psd <= p.bias_comp * st.running_min
    updated = p.alpha_d * st.lam + (1.0 - p.alpha_d) * frame_power
    st.lam = np.where(speech_absent, updated, st.lam)
    st.lam = np.maximum(st.lam, p.lambda_floor)
    return st, st.lam.copy()
