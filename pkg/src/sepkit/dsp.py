"""Short-time Fourier analysis/synthesis, mel features and normalization.

Waveforms are plain float arrays at a fixed 16 kHz rate; spectrograms are
complex (T, F) arrays with F = fft_size // 2 + 1. The default geometry is
25 ms frames (400 samples), 10 ms hop (160) and a 512-point FFT, giving
257 bins.

Functions that sit on differentiable paths (``feature_transform``,
``log_mvn``, ``magnitude_mask_product``) accept either numpy arrays or
:class:`~sepkit.tensor.DiffTensor` and preserve the input flavor.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as dt
from .errors import DataIOError, DimensionError, InputError

SAMPLE_RATE = 16000
EPS = 1e-8  # floor for log arguments and deviation estimates

__all__ = [
    "SAMPLE_RATE",
    "EPS",
    "StftConfig",
    "hamming_window",
    "stft",
    "istft",
    "num_frames",
    "apply_mask",
    "MelTransform",
    "mel_matrix",
    "feature_transform",
    "log_mvn",
    "ideal_amplitude_mask",
    "read_wav",
    "write_wav",
]


@dataclass(frozen=True)
class StftConfig:
    frame_length: int = 400
    hop: int = 160
    fft_size: int = 512

    def __post_init__(self):
        if self.frame_length > self.fft_size:
            raise InputError(
                f"frame_length {self.frame_length} exceeds fft_size {self.fft_size}")
        if not 0 < self.hop < self.frame_length:
            raise InputError(
                f"hop {self.hop} must lie in (0, frame_length={self.frame_length})")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1


def hamming_window(n: int) -> np.ndarray:
    """Periodic Hamming window, 0.54/0.46 convention."""
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / n)


def num_frames(n_samples: int, cfg: StftConfig) -> int:
    return 1 + (n_samples - cfg.frame_length) // cfg.hop


def stft(samples: np.ndarray, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Windowed, zero-padded rFFT frames; returns complex (T, bins)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise InputError(f"stft expects mono audio, got shape {x.shape}")
    if x.size < cfg.frame_length:
        raise InputError(
            f"audio of {x.size} samples is shorter than one frame ({cfg.frame_length})")
    T = num_frames(x.size, cfg)
    idx = np.arange(cfg.frame_length)[None, :] + cfg.hop * np.arange(T)[:, None]
    frames = x[idx] * hamming_window(cfg.frame_length)
    return np.fft.rfft(frames, n=cfg.fft_size, axis=1)


def istft(spec: np.ndarray, cfg: StftConfig = StftConfig(),
          length: int | None = None) -> np.ndarray:
    """Weighted overlap-add inverse with window-squared normalization."""
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != cfg.bins:
        raise DimensionError(
            f"spectrogram shape {spec.shape} does not match {cfg.bins} bins")
    T = spec.shape[0]
    span = (T - 1) * cfg.hop + cfg.frame_length
    if length is None:
        length = span
    if length > span:
        raise InputError(
            f"requested length {length} exceeds synthesizable span {span}")
    win = hamming_window(cfg.frame_length)
    frames = np.fft.irfft(spec, n=cfg.fft_size, axis=1)[:, :cfg.frame_length]
    out = np.zeros(span)
    wsum = np.zeros(span)
    for t in range(T):
        lo = t * cfg.hop
        out[lo:lo + cfg.frame_length] += frames[t] * win
        wsum[lo:lo + cfg.frame_length] += win * win
    out /= np.maximum(wsum, EPS)
    return out[:length]


def apply_mask(spec: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Scale complex bins by a real mask in [0, 1]; phases are preserved."""
    spec = np.asarray(spec)
    m = mask.data if isinstance(mask, dt.DiffTensor) else np.asarray(mask)
    if spec.shape != m.shape:
        raise DimensionError(
            f"mask shape {m.shape} does not match spectrogram shape {spec.shape}")
    return spec * m


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelTransform:
    matrix: np.ndarray  # (n_mels, bins), nonnegative

    @property
    def n_mels(self) -> int:
        return self.matrix.shape[0]

    @property
    def bins(self) -> int:
        return self.matrix.shape[1]


def mel_matrix(n_mels: int = 80, cfg: StftConfig = StftConfig(),
               fmin: float = 0.0, fmax: float = SAMPLE_RATE / 2,
               rate: int = SAMPLE_RATE) -> MelTransform:
    """Triangular mel filterbank on the rFFT bin grid (HTK mel scale)."""
    bin_freqs = np.arange(cfg.bins) * rate / cfg.fft_size
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    weights = np.zeros((n_mels, cfg.bins))
    for d in range(n_mels):
        lo, mid, hi = edges[d], edges[d + 1], edges[d + 2]
        up = (bin_freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - bin_freqs) / max(hi - mid, 1e-12)
        weights[d] = np.maximum(0.0, np.minimum(up, down))
    return MelTransform(matrix=weights)


def feature_transform(magnitude, mel: MelTransform):
    """Linear feature map: (T, F) magnitudes -> (T, D) mel energies.

    Differentiable when handed a DiffTensor; otherwise plain numpy.
    """
    mshape = magnitude.shape
    if len(mshape) != 2 or mshape[1] != mel.bins:
        raise DimensionError(
            f"magnitude shape {tuple(mshape)} does not match mel bins {mel.bins}")
    if isinstance(magnitude, dt.DiffTensor):
        basis = dt.astensor(mel.matrix.T.astype(magnitude.dtype))
        return dt.matmul(magnitude, basis)
    return np.asarray(magnitude) @ mel.matrix.T


def log_mvn(magnitude):
    """log(max(x, eps)) then per-column mean/deviation normalization over time.

    Constant columns normalize to exactly zero (deviation floored at eps).
    Differentiable when handed a DiffTensor.
    """
    is_tensor = isinstance(magnitude, dt.DiffTensor)
    x = magnitude if is_tensor else dt.astensor(np.asarray(magnitude, dtype=np.float64))
    out = dt.standardize(dt.log(dt.clamp_min(x, EPS)), axis=0, eps=EPS)
    return out if is_tensor else out.data


def ideal_amplitude_mask(ref_mag: np.ndarray, mix_mag: np.ndarray) -> np.ndarray:
    """|reference| / |mixture| clamped to [0, 1] (oracle mask)."""
    return np.clip(np.asarray(ref_mag) / np.maximum(np.asarray(mix_mag), EPS), 0.0, 1.0)


# ---------------------------------------------------------------------------
# WAV ingestion / emission: 16-bit PCM mono at 16 kHz only
# ---------------------------------------------------------------------------

def read_wav(path) -> np.ndarray:
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            ch, width, rate, n = (w.getnchannels(), w.getsampwidth(),
                                  w.getframerate(), w.getnframes())
            if ch != 1:
                raise DataIOError(f"{path}: expected mono, got {ch} channels")
            if width != 2:
                raise DataIOError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
            if rate != SAMPLE_RATE:
                raise DataIOError(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz")
            raw = w.readframes(n)
    except wave.Error as e:
        raise DataIOError(f"{path}: not a readable WAV file ({e})") from e
    except FileNotFoundError as e:
        raise DataIOError(f"missing WAV file: {path}") from e
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0


def write_wav(path, samples: np.ndarray, rate: int = SAMPLE_RATE) -> None:
    if rate != SAMPLE_RATE:
        raise DataIOError(f"only {SAMPLE_RATE} Hz emission is supported, got {rate}")
    x = np.asarray(samples, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InputError("waveform contains non-finite samples")
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(rate)
            w.writeframes(pcm.tobytes())
    except OSError as e:
        raise DataIOError(f"cannot write WAV {path}: {e}") from e
