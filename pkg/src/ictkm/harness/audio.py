"""Audio ingestion, atom spectra and sonification.

WAV files are decoded with the standard-library :mod:`wave` reader, so
only integer PCM is accepted (16- and 24-bit, plus 8/32-bit for
convenience). Channels are averaged to mono and the signal is cut into
overlapping blocks, one training signal per block.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SILENCE = 1e-8


class AudioFormatError(ValueError):
    pass


@dataclass
class AudioCorpus:
    sample_rate: int
    samples: list
    block_length: int
    overlap: float
    stride: int
    block_counts: list
    dropped_blocks: int = 0

    @property
    def n_blocks(self):
        return sum(self.block_counts) - self.dropped_blocks


def read_wav(path):
    """Return ``(sample_rate, mono float samples in [-1, 1))``."""
    try:
        with wave.open(str(path), "rb") as fh:
            rate = fh.getframerate()
            width = fh.getsampwidth()
            channels = fh.getnchannels()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: unsupported WAV encoding ({exc})") from exc
    data = _decode_pcm(raw, width)
    data = data.reshape(-1, channels).mean(axis=1)
    return rate, data


def _decode_pcm(raw, width):
    if width == 1:
        return (np.frombuffer(raw, np.uint8).astype(float) - 128.0) / 128.0
    if width == 2:
        return np.frombuffer(raw, "<i2").astype(float) / 2**15
    if width == 3:
        b = np.frombuffer(raw, np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 2**23, v - 2**24, v)
        return v.astype(float) / 2**23
    if width == 4:
        return np.frombuffer(raw, "<i4").astype(float) / 2**31
    raise AudioFormatError(f"unsupported sample width {width} bytes")


def write_wav(path, samples, sample_rate, sampwidth=2):
    """Write mono (1-D) or multi-channel (``(n, channels)``) float samples
    in ``[-1, 1]`` as integer PCM."""
    x = np.asarray(samples, dtype=float)
    channels = 1 if x.ndim == 1 else x.shape[1]
    scale = 2 ** (8 * sampwidth - 1)
    q = np.clip(np.round(x.reshape(-1) * scale), -scale, scale - 1).astype(np.int64)
    if sampwidth == 2:
        payload = q.astype("<i2").tobytes()
    elif sampwidth == 3:
        u = (q % 2**24).astype(np.uint32)
        payload = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    else:
        raise AudioFormatError("only 16- and 24-bit output is supported")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(sampwidth)
        fh.setframerate(int(sample_rate))
        fh.writeframes(payload)


def block_stride(block_length, overlap):
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    return max(1, int(round((1 - overlap) * block_length)))


def slice_blocks(samples, block_length, stride):
    """``(block_length, n_blocks)`` matrix of overlapping blocks."""
    n = samples.shape[0]
    if n < block_length:
        return np.zeros((block_length, 0))
    count = (n - block_length) // stride + 1
    view = np.lib.stride_tricks.sliding_window_view(samples, block_length)[::stride]
    return np.array(view[:count].T)


def ingest_audio(paths, block_seconds=0.25, overlap=0.95, sample_rate=None, normalize=True):
    """Decode WAV files and turn them into training signals.

    Returns ``(corpus, Y)`` with ``Y`` of shape ``(block_length, N)``.
    With ``normalize`` every block is scaled to unit norm and blocks with
    norm below ``1e-8`` are dropped.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    rate = sample_rate
    tracks = []
    for p in paths:
        r, x = read_wav(p)
        if rate is None:
            rate = r
        elif r != rate:
            raise AudioFormatError(f"{p}: sample rate {r} Hz differs from {rate} Hz")
        tracks.append(x)
    block = int(round(block_seconds * rate))
    stride = block_stride(block, overlap)
    blocks = [slice_blocks(x, block, stride) for x in tracks]
    counts = [b.shape[1] for b in blocks]
    Y = np.hstack(blocks) if blocks else np.zeros((block, 0))
    dropped = 0
    if normalize and Y.shape[1]:
        norms = np.linalg.norm(Y, axis=0)
        keep = norms >= SILENCE
        dropped = int((~keep).sum())
        Y = Y[:, keep] / norms[keep]
    corpus = AudioCorpus(rate, tracks, block, overlap, stride, counts, dropped)
    return corpus, Y


@dataclass
class AtomSpectrum:
    index: int
    fundamental_hz: float
    spectrum: np.ndarray


def analyze_atoms(dico, sample_rate, floor_hz=50.0):
    """Magnitude spectrum and dominant frequency of each atom, sorted by
    ascending fundamental. The fundamental is the frequency of the largest
    spectral bin at or above ``floor_hz``."""
    dico = np.asarray(dico)
    d = dico.shape[0]
    spectra = np.abs(np.fft.rfft(dico, axis=0))
    freqs = np.fft.rfftfreq(d, 1.0 / sample_rate)
    valid = freqs >= floor_hz
    if not valid.any():
        raise ValueError("frequency floor lies above the Nyquist frequency")
    masked = np.where(valid[:, None], spectra, -1.0)
    peaks = freqs[np.argmax(masked, axis=0)]
    order = np.argsort(peaks, kind="stable")
    return [AtomSpectrum(int(k), float(peaks[k]), spectra[:, k]) for k in order]


def export_atoms_wav(dico, sample_rate, directory, prefix="atom"):
    """Write each atom, peak-normalized, as a 16-bit mono WAV file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(dico.shape[1]):
        atom = np.asarray(dico[:, k], dtype=float)
        peak = np.max(np.abs(atom))
        path = directory / f"{prefix}_{k:04d}.wav"
        write_wav(path, atom / peak if peak > 0 else atom, sample_rate)
        paths.append(path)
    return paths
