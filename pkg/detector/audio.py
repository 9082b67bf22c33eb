import logging
import math
from dataclasses import dataclass

import gin
import numpy as np
from scipy import signal
from scipy.io import wavfile

from .exceptions import (
    EmptyAfterTrim,
    InputTooShort,
    MalformedWav,
    UnsupportedEncoding,
)

"""
Waveform ingestion and the preprocessing recipe applied to every clip

Recipe: mono -> 16 kHz -> long silences shortened -> fixed length.
Used by "handle_data.py" (training/eval datasets) and the commands.

Notations:
- clip : AudioClip
- len, n : lengths in samples
- rate : sample rate in Hz
"""

TARGET_RATE = 16000
CLIP_LEN = 64600  # ~4 s at 16 kHz

# scipy.io.wavfile messages for codecs it recognises but we refuse
_UNSUPPORTED_MESSAGES = ("Unknown wave file format", "Unsupported bit depth")


@dataclass
class AudioClip:
    """Mono sample buffer (float32, nominally in [-1, 1]) and its rate"""

    samples: np.ndarray
    sample_rate: int

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        """duration in seconds"""
        return len(self.samples) / self.sample_rate


def to_mono(samples):
    """Averages channels of a (frames, channels) buffer

    samples (float array): 1D mono or 2D (frames, channels) buffer

    Returns:
        (float32 array): 1D mono buffer
    """
    if samples.ndim == 1:
        return samples.astype(np.float32, copy=False)
    return samples.mean(axis=1, dtype=np.float64).astype(np.float32)


def load_wav(path):
    """Reads a PCM16 or float32 WAV file, 1 or 2 channels

    path (str or Path): RIFF/WAVE file

    Returns:
        (AudioClip): mono samples scaled to [-1, 1], original sample rate
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as err:
        msg = str(err)
        if msg.startswith(_UNSUPPORTED_MESSAGES):
            raise UnsupportedEncoding(f"{path}: {msg}") from err
        raise MalformedWav(f"{path}: {msg}") from err
    except (EOFError, OSError) as err:
        raise MalformedWav(f"{path}: {err}") from err

    if data.dtype == np.int16:
        data = data.astype(np.float32) / 32768.0
    elif data.dtype != np.float32:
        raise UnsupportedEncoding(f"{path}: {data.dtype} samples")
    if data.ndim == 2 and data.shape[1] > 2:
        raise UnsupportedEncoding(f"{path}: {data.shape[1]} channels")
    if data.size == 0:
        raise MalformedWav(f"{path}: no samples")
    return AudioClip(to_mono(data), int(rate))


def save_wav(path, clip):
    """Writes a clip as float32 WAV"""
    wavfile.write(path, clip.sample_rate, clip.samples.astype(np.float32))


@gin.configurable
def resample(clip, target_rate, taps_per_phase=64, cutoff=0.9, kaiser_beta=8.6):
    """Polyphase windowed-sinc resampling

    clip (AudioClip): input clip
    target_rate (int): output rate in Hz
    taps_per_phase (int): filter length per max(up, down) phase
    cutoff (float): low-pass cutoff, fraction of the lower rate's Nyquist
    kaiser_beta (float): Kaiser window shape

    Returns:
        (AudioClip): clip of length round(len * target_rate / sample_rate)
    """
    source_rate = clip.sample_rate
    if source_rate == target_rate:
        return AudioClip(clip.samples.copy(), source_rate)

    gcd = math.gcd(source_rate, target_rate)
    up, down = target_rate // gcd, source_rate // gcd
    max_rate = max(up, down)
    half_len = taps_per_phase * max_rate // 2
    taps = signal.firwin(
        2 * half_len + 1, cutoff / max_rate, window=("kaiser", kaiser_beta)
    )
    out = signal.resample_poly(
        clip.samples.astype(np.float64), up, down, window=taps
    )
    # integer round-half-up of len * up / down
    n_out = (2 * len(clip) * up + down) // (2 * down)
    if len(out) < n_out:
        out = np.pad(out, (0, n_out - len(out)))
    return AudioClip(out[:n_out].astype(np.float32), target_rate)


def silent_frames(clip, frame_ms=20, threshold_db=40.0):
    """Flags non-overlapping frames whose RMS is threshold_db below the
    loudest full frame

    A trailing partial frame is flagged but never counted as silent and
    takes no part in the peak, unless the clip is shorter than a frame.

    Returns:
        (bool array): one flag per frame (trailing partial frame included)
        (int): frame length in samples
    """
    frame_len = int(round(clip.sample_rate * frame_ms / 1000))
    x = clip.samples.astype(np.float64)
    n_full = len(x) // frame_len
    if n_full == 0:
        if not np.any(x):
            raise EmptyAfterTrim("clip contains no non-silent frame")
        return np.zeros(1, dtype=bool), frame_len

    frames = x[: n_full * frame_len].reshape(n_full, frame_len)
    rms = np.sqrt((frames ** 2).sum(axis=1) / frame_len)
    peak = rms.max()
    if peak == 0:
        raise EmptyAfterTrim("clip contains no non-silent frame")
    flags = rms < peak * 10 ** (-threshold_db / 20)
    if len(x) > n_full * frame_len:
        flags = np.append(flags, False)
    return flags, frame_len


def _runs(flags):
    """(start, stop) index pairs of the runs of True in a bool array"""
    edges = np.diff(np.concatenate([[False], flags, [False]]).astype(np.int8))
    return zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1))


def _edge_run(flags):
    """length of the run of True at the start of a bool array"""
    stops = np.flatnonzero(~flags)
    return int(stops[0]) if len(stops) else len(flags)


@gin.configurable
def trim_silence(clip, max_silence_s=0.2, frame_ms=20, threshold_db=40.0, wrap=False):
    """Shortens every silent run longer than max_silence_s to its leading
    max_silence_s

    clip (AudioClip): 16 kHz mono clip
    max_silence_s (float): longest silence kept, in seconds
    frame_ms (int): analysis frame length
    threshold_db (float): distance below the loudest frame counted as silent
    wrap (bool): the clip is about to be tiled end-to-start: its trailing
        partial frame is dropped and the silence closing the clip plus the
        silence opening it are shortened as a single run

    Returns:
        (AudioClip): trimmed clip, never longer than the input
    """
    flags, frame_len = silent_frames(clip, frame_ms, threshold_db)
    max_frames = int(round(max_silence_s * 1000 / frame_ms))
    keep = np.ones(len(flags), dtype=bool)
    for first, last in _runs(flags):
        if last - first > max_frames:
            keep[first + max_frames: last] = False

    n_full = len(clip) // frame_len
    samples = clip.samples
    if wrap and n_full:
        samples = samples[: n_full * frame_len]
        keep = keep[:n_full]
        kept = np.flatnonzero(keep)
        head = _edge_run(flags[kept])
        tail = _edge_run(flags[kept][::-1])
        # the seam run reads tail then head; its leading max_frames stay
        excess = head + tail - max_frames
        if excess > 0:
            keep[kept[head - excess: head]] = False

    mask = np.repeat(keep, frame_len)[: len(samples)]
    return AudioClip(samples[mask], clip.sample_rate)


def normalize_length(clip, target_len=CLIP_LEN):
    """Truncates to target_len or tiles the clip end-to-start up to it"""
    if len(clip) < 1:
        raise InputTooShort("cannot normalize an empty clip")
    return AudioClip(
        np.resize(clip.samples, target_len).astype(np.float32), clip.sample_rate
    )


def preprocess(clip, clip_len=CLIP_LEN, target_rate=TARGET_RATE):
    """Full recipe: resample, shorten silences, fix the length

    clip (AudioClip): mono clip at any rate
    clip_len (int): output length in samples (64600 ~ 4s, 16000 = 1s)
    target_rate (int): output rate

    Returns:
        (AudioClip): clip of exactly clip_len samples at target_rate,
            unchanged by a second pass
    """
    clip = resample(clip, target_rate)
    clip = trim_silence(clip)
    if len(clip) < clip_len:
        # tiling joins the end to the start
        clip = trim_silence(clip, wrap=True)
    return normalize_length(clip, clip_len)


def split_into_chunks(clip, chunk_len=CLIP_LEN):
    """Cuts a long recording into consecutive chunk_len windows

    The last window is tiled to full length, so a recording shorter
    than chunk_len gives one tiled chunk.

    Returns:
        (float32 2D array): (nb_chunks, chunk_len)
    """
    if len(clip) < 1:
        raise InputTooShort("cannot chunk an empty clip")
    nb_chunks = -(-len(clip) // chunk_len)
    chunks = np.empty((nb_chunks, chunk_len), dtype=np.float32)
    for idx in range(nb_chunks):
        part = clip.samples[idx * chunk_len: (idx + 1) * chunk_len]
        chunks[idx] = np.resize(part, chunk_len)
    logging.debug(f"{len(clip)} samples cut into {nb_chunks} chunks")
    return chunks
