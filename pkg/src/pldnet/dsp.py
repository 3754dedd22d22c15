"""Windowed STFT / inverse STFT with exact overlap-add reconstruction, plus WAV I/O.

All audio in this package is 16 kHz. Spectra use a one-sided FFT with a
square-root Hann analysis/synthesis window pair (exact COLA at 50% overlap).
Framing is causal: the signal is zero-padded on the left by ``win_len - hop``
samples so that frame ``l`` never looks at samples later than ``l*hop + hop``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

PIPELINE_SAMPLE_RATE = 16000


class InvalidInput(ValueError):
    """Raised when an operation receives data that violates its contract."""


def sqrt_hann(length: int) -> np.ndarray:
    """Periodic square-root Hann window; its square sums to 1 at 50% overlap."""
    n = np.arange(length)
    return np.sqrt(0.5 * (1.0 - np.cos(2.0 * np.pi * n / length)))


@dataclass(frozen=True)
class StftConfig:
    win_len: int = 512
    hop: int = 256
    fft_size: int = 512
    window: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.hop > self.win_len:
            raise InvalidInput(f"hop {self.hop} exceeds window length {self.win_len}")
        if self.fft_size < self.win_len:
            raise InvalidInput(f"fft_size {self.fft_size} < win_len {self.win_len}")
        win = self.window if self.window is not None else sqrt_hann(self.win_len)
        win = np.asarray(win, dtype=np.float64)
        if win.shape != (self.win_len,):
            raise InvalidInput("window length must equal win_len")
        object.__setattr__(self, "window", win)
        self._check_cola()

    def _check_cola(self, tol: float = 1e-10) -> None:
        # Overlap-added analysis*synthesis product must be constant at this hop.
        wsq = self.window * self.window
        acc = np.zeros(self.hop)
        for off in range(0, self.win_len, self.hop):
            acc += wsq[off : off + self.hop]
        if np.max(np.abs(acc - acc[0])) > tol or acc[0] <= 0:
            raise InvalidInput("analysis/synthesis window pair violates COLA at this hop")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def pad_left(self) -> int:
        return self.win_len - self.hop


@dataclass
class AudioBuffer:
    """Multi-channel audio: samples[channels, num_samples], nominal range [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int = PIPELINE_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise InvalidInput("samples must be a [channels x num_samples] array")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidInput("audio contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise InvalidInput("sample rate must be positive")

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    def channel(self, idx: int) -> np.ndarray:
        return self.samples[idx]


@dataclass
class ComplexSpectrogram:
    """Complex T-F coefficients, data[channels, F, T]."""

    data: np.ndarray
    config: StftConfig

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim == 2:
            self.data = self.data[None, :, :]
        if self.data.ndim != 3:
            raise InvalidInput("spectrogram data must be [channels x F x T]")
        if self.data.shape[1] != self.config.num_bins:
            raise InvalidInput(
                f"expected {self.config.num_bins} frequency bins, got {self.data.shape[1]}"
            )
        if not np.all(np.isfinite(self.data)):
            raise InvalidInput("spectrogram contains non-finite values")

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_bins(self) -> int:
        return self.data.shape[1]

    @property
    def num_frames(self) -> int:
        return self.data.shape[2]


def frame_count(num_samples: int, cfg: StftConfig) -> int:
    """Number of frames produced for a signal of the given length."""
    padded = num_samples + cfg.pad_left
    return (padded - cfg.win_len) // cfg.hop + 1


def stft(audio: AudioBuffer, cfg: StftConfig = None) -> ComplexSpectrogram:
    """Causally framed one-sided STFT of every channel.

    The signal is left-padded with ``win_len - hop`` zeros; frame ``l`` covers
    input samples ``[l*hop - win_len + hop, l*hop + hop)``. No normalization
    is applied beyond the analysis window.
    """
    cfg = cfg or StftConfig()
    if audio.num_samples == 0:
        raise InvalidInput("empty audio")
    if not np.all(np.isfinite(audio.samples)):
        raise InvalidInput("audio contains non-finite samples")
    n_frames = frame_count(audio.num_samples, cfg)
    if n_frames < 1:
        raise InvalidInput(
            f"signal too short for STFT: {audio.num_samples} samples < hop {cfg.hop}"
        )
    x = np.pad(audio.samples, ((0, 0), (cfg.pad_left, 0)))
    idx = np.arange(cfg.win_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = x[:, idx] * cfg.window  # [ch, T, win]
    spec = np.fft.rfft(frames, n=cfg.fft_size, axis=-1)  # [ch, T, F]
    return ComplexSpectrogram(np.transpose(spec, (0, 2, 1)), cfg)


def istft(spec: ComplexSpectrogram, cfg: StftConfig = None, out_len: int = None) -> AudioBuffer:
    """Overlap-add synthesis inverting :func:`stft`.

    Interior samples reconstruct exactly; the trailing partial-overlap region
    is corrected by the accumulated squared-window envelope.
    """
    cfg = cfg or spec.config
    if spec.config.win_len != cfg.win_len or spec.config.hop != cfg.hop or spec.config.fft_size != cfg.fft_size:
        raise InvalidInput("spectrogram was produced with a different STFT configuration")
    n_ch, n_bins, n_frames = spec.data.shape
    frames = np.fft.irfft(np.transpose(spec.data, (0, 2, 1)), n=cfg.fft_size, axis=-1)
    frames = frames[:, :, : cfg.win_len] * cfg.window
    total = (n_frames - 1) * cfg.hop + cfg.win_len
    y = np.zeros((n_ch, total))
    env = np.zeros(total)
    wsq = cfg.window * cfg.window
    for l in range(n_frames):
        y[:, l * cfg.hop : l * cfg.hop + cfg.win_len] += frames[:, l]
        env[l * cfg.hop : l * cfg.hop + cfg.win_len] += wsq
    y /= np.maximum(env, 1e-12)
    y = y[:, cfg.pad_left :]
    if out_len is None:
        out_len = y.shape[1]
    if out_len <= y.shape[1]:
        y = y[:, :out_len]
    else:
        y = np.pad(y, ((0, 0), (0, out_len - y.shape[1])))
    return AudioBuffer(y)


def read_wav(path: str, expected_rate: int = PIPELINE_SAMPLE_RATE) -> AudioBuffer:
    """Read a 16-bit PCM or 32-bit float WAV as float64 in [-1, 1].

    Anything else (8/24/32-bit int, float64, wrong sample rate) is rejected.
    """
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise InvalidInput(f"cannot read WAV file {path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise InvalidInput(
            f"{path}: unsupported WAV sample format {data.dtype}; "
            "only 16-bit PCM and 32-bit IEEE float are accepted"
        )
    if expected_rate is not None and rate != expected_rate:
        raise InvalidInput(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    if samples.ndim == 1:
        samples = samples[None, :]
    else:
        samples = samples.T  # wavfile returns [samples, channels]
    if samples.shape[0] > 2:
        raise InvalidInput(f"{path}: {samples.shape[0]} channels, only mono/stereo supported")
    return AudioBuffer(samples, rate)


def write_wav(path: str, audio: AudioBuffer, dtype: str = "float32") -> None:
    """Write mono/stereo WAV; float32 by default to avoid quantization."""
    if audio.num_channels > 2:
        raise InvalidInput("only mono/stereo WAV output supported")
    data = audio.samples.T
    if data.shape[1] == 1:
        data = data[:, 0]
    if dtype == "float32":
        wavfile.write(path, audio.sample_rate_hz, data.astype(np.float32))
    elif dtype == "int16":
        clipped = np.clip(data, -1.0, 1.0)
        wavfile.write(path, audio.sample_rate_hz, (clipped * 32767.0).round().astype(np.int16))
    else:
        raise InvalidInput(f"unsupported output dtype {dtype}")
