"""STFT front end, amplitude compression, SI-SDR and WAV I/O."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window

from .errors import DomainError

__all__ = [
    "StftConfig",
    "Waveform",
    "Spectrogram",
    "IstftContext",
    "stft",
    "istft",
    "compress",
    "decompress",
    "si_sdr",
    "read_wav",
    "write_wav",
    "dump_spectrogram_csv",
]


@dataclass(frozen=True)
class StftConfig:
    """Analysis settings; the defaults are a periodic Hann of 510 with hop 128."""

    win_len: int = 510
    hop: int = 128
    fft_len: int = 510
    center_pad: bool = True
    window: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 < self.hop < self.win_len):
            raise DomainError(f"need 0 < hop < win_len, got hop={self.hop}, win_len={self.win_len}")
        if self.fft_len < self.win_len:
            raise DomainError("fft_len must be >= win_len")
        win = get_window("hann", self.win_len, fftbins=True)
        lpad = (self.fft_len - self.win_len) // 2
        win = np.pad(win, (lpad, self.fft_len - self.win_len - lpad))
        # steady-state window-sum-squares over one hop period
        wss = np.zeros(self.hop)
        for n in range(self.hop):
            wss[n] = np.sum(win[n :: self.hop] ** 2)
        if np.any(wss <= 0):
            raise DomainError("window-sum-squares vanishes; choose a smaller hop")
        object.__setattr__(self, "window", win)

    @property
    def n_bins(self) -> int:
        return self.fft_len // 2 + 1

    @property
    def pad(self) -> int:
        return self.fft_len // 2 if self.center_pad else 0

    def n_frames(self, length: int) -> int:
        if self.center_pad:
            return int(math.ceil(length / self.hop))
        if length < self.fft_len:
            raise DomainError(f"signal shorter than fft_len={self.fft_len} without center padding")
        return 1 + (length - self.fft_len) // self.hop


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise DomainError("waveforms are mono 1-D arrays")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.size


@dataclass
class Spectrogram:
    """``frames x bins`` complex STFT plus what is needed to invert it."""

    data: np.ndarray
    config: StftConfig
    length: int
    sample_rate: int = 16000

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2 or self.data.shape[1] != self.config.n_bins:
            raise DomainError(f"expected (frames, {self.config.n_bins}) data, got {self.data.shape}")

    def with_data(self, data) -> "Spectrogram":
        return Spectrogram(np.asarray(data), self.config, self.length, self.sample_rate)


def _samples(w) -> tuple:
    if isinstance(w, Waveform):
        return w.samples, w.sample_rate
    return np.asarray(w, dtype=float), 16000


def stft(w: Union[Waveform, np.ndarray], cfg: Optional[StftConfig] = None) -> Spectrogram:
    """Centred, windowed, one-sided STFT with ``ceil(len / hop)`` frames."""
    cfg = cfg or StftConfig()
    x, sr = _samples(w)
    if x.size == 0:
        raise DomainError("cannot transform an empty signal")
    n_frames = cfg.n_frames(x.size)
    pad = cfg.pad
    need = (n_frames - 1) * cfg.hop + cfg.fft_len
    padded = np.zeros(max(need, x.size + 2 * pad))
    padded[pad : pad + x.size] = x
    idx = np.arange(cfg.fft_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * cfg.window
    return Spectrogram(np.fft.rfft(frames, n=cfg.fft_len, axis=1), cfg, x.size, sr)


def istft(s: Spectrogram) -> Waveform:
    """Least-squares inverse: overlap-add normalised by window-sum-squares."""
    cfg = s.config
    n_frames = s.data.shape[0]
    frames = np.fft.irfft(s.data, n=cfg.fft_len, axis=1) * cfg.window
    total = (n_frames - 1) * cfg.hop + cfg.fft_len
    ola = np.zeros(total)
    wss = np.zeros(total)
    w2 = cfg.window**2
    for m in range(n_frames):
        sl = slice(m * cfg.hop, m * cfg.hop + cfg.fft_len)
        ola[sl] += frames[m]
        wss[sl] += w2
    out = cfg.pad + np.arange(s.length)
    out = out[out < total]
    if np.any(wss[out] <= 0):
        raise DomainError("window-sum-squares vanishes inside the output range")
    y = np.zeros(s.length)
    y[: out.size] = ola[out] / wss[out]
    return Waveform(y, s.sample_rate)


@dataclass(frozen=True)
class IstftContext:
    """Maps raw spectrogram arrays to time-domain samples."""

    config: StftConfig
    length: int

    def __call__(self, data) -> np.ndarray:
        return istft(Spectrogram(data, self.config, self.length)).samples


def compress(s, beta: float = 0.5, scale: float = 0.15):
    """``scale * |v|**beta * exp(i angle v)`` per bin."""
    if not (0 < beta <= 1) or not scale > 0:
        raise DomainError(f"need beta in (0, 1] and scale > 0, got {beta}, {scale}")
    if isinstance(s, Spectrogram):
        return s.with_data(compress(s.data, beta, scale))
    v = np.asarray(s, dtype=complex)
    return scale * np.abs(v) ** beta * np.exp(1j * np.angle(v))


def decompress(s, beta: float = 0.5, scale: float = 0.15):
    """Exact inverse of ``compress`` (zero maps to zero)."""
    if not (0 < beta <= 1) or not scale > 0:
        raise DomainError(f"need beta in (0, 1] and scale > 0, got {beta}, {scale}")
    if isinstance(s, Spectrogram):
        return s.with_data(decompress(s.data, beta, scale))
    v = np.asarray(s, dtype=complex)
    return (np.abs(v) / scale) ** (1.0 / beta) * np.exp(1j * np.angle(v))


# residual energy below this fraction of the target counts as exact
_EXACT_FLOOR = (16 * np.finfo(float).eps) ** 2


def si_sdr(reference, estimate) -> float:
    """Scale-invariant SDR in dB; ``inf`` when the residual is at round-off level."""
    s, _ = _samples(reference)
    s_hat, _ = _samples(estimate)
    if s.shape != s_hat.shape:
        raise DomainError(f"length mismatch: {s.shape} vs {s_hat.shape}")
    ref_energy = float(np.dot(s, s))
    if ref_energy == 0:
        raise DomainError("reference signal is all zeros")
    alpha = float(np.dot(s_hat, s)) / ref_energy
    target = alpha * s
    target_energy = float(np.dot(target, target))
    residual = target - s_hat
    res_energy = float(np.dot(residual, residual))
    if target_energy == 0:
        return -math.inf
    if res_energy <= _EXACT_FLOOR * target_energy:
        return math.inf
    return 10.0 * math.log10(target_energy / res_energy)


def read_wav(path) -> Waveform:
    """Read a mono 16-bit PCM or 32-bit float WAV file."""
    sr, data = wavfile.read(path)
    if data.ndim != 1:
        raise DomainError(f"{path}: only mono audio is supported, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise DomainError(f"{path}: unsupported sample format {data.dtype}")
    return Waveform(x, int(sr))


def write_wav(path, w: Waveform, fmt: str = "float32") -> None:
    if fmt == "float32":
        data = w.samples.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise DomainError(f"unknown WAV format {fmt!r}")
    wavfile.write(path, int(w.sample_rate), data)


def dump_spectrogram_csv(path, s: Spectrogram) -> None:
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame", "bin", "re", "im"])
        for m, row in enumerate(s.data):
            for k, v in enumerate(row):
                wr.writerow([m, k, repr(float(v.real)), repr(float(v.imag))])
