import shutil
from collections import Counter

import numpy as np
import pytest
from scipy.io import wavfile

from detector.audio import (
    CLIP_LEN,
    AudioClip,
    load_wav,
    normalize_length,
    preprocess,
    resample,
    save_wav,
    split_into_chunks,
    trim_silence,
)
from detector.exceptions import (
    EmptyAfterTrim,
    InputTooShort,
    InvalidManifest,
    MalformedWav,
    MissingClass,
    NoBonafideDir,
    UnsupportedEncoding,
    UsageError,
)
from detector.lfcc import (
    LfccConfig,
    frame_and_window,
    hann_window,
    lfcc,
    linear_filterbank,
    power_spectrum,
)
from detector.manifest import (
    BONAFIDE,
    FAKE,
    DatasetManifest,
    ManifestRecord,
    build_manifest,
    oversample_balance,
    read_manifest,
    split_manifest,
    split_sizes,
    subsample_split,
    write_manifest,
)

"""
Test module for the audio front of the detector

Files covered: "audio.py", "manifest.py", "lfcc.py"
"""


def _tone(freq, seconds, rate=16000, amplitude=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return (amplitude * np.sin(2 * np.pi * freq * t)).astype(np.float32)


def _records(nb, label=FAKE, attack="melgan", split=None, prefix="clip"):
    return [
        ManifestRecord(f"/data/{attack}/{prefix}_{idx:04d}.wav", label, attack, split)
        for idx in range(nb)
    ]


def _write_wavs(folder, nb, name="clip"):
    folder.mkdir(parents=True, exist_ok=True)
    for idx in range(nb):
        save_wav(folder / f"{name}_{idx}.wav", AudioClip(_tone(220, 0.1), 16000))


# ========== unit tests ===============
# ---------- audio.py ----------------
def test_load_wav_scaling(tmp_path):
    path = tmp_path / "pcm.wav"
    wavfile.write(path, 44100, np.array([0, 16384, -32768], dtype=np.int16))
    clip = load_wav(path)
    assert clip.sample_rate == 44100  # rate preserved
    assert clip.samples.dtype == np.float32
    assert np.array_equal(clip.samples, [0.0, 0.5, -1.0])


def test_load_wav_stereo(tmp_path):
    path = tmp_path / "stereo.wav"
    wavfile.write(path, 16000, np.array([[1.0, 0.0]], dtype=np.float32))
    assert np.array_equal(load_wav(path).samples, [0.5])  # channel average


def test_load_wav_errors(tmp_path):
    eight_bits = tmp_path / "u8.wav"
    wavfile.write(eight_bits, 16000, np.array([0, 128, 255], dtype=np.uint8))
    with pytest.raises(UnsupportedEncoding):
        load_wav(eight_bits)
    pcm32 = tmp_path / "pcm32.wav"
    wavfile.write(pcm32, 16000, np.array([0, 1 << 20], dtype=np.int32))
    with pytest.raises(UnsupportedEncoding):  # PCM16 and float32 only
        load_wav(pcm32)
    garbage = tmp_path / "garbage.wav"
    garbage.write_bytes(b"definitely not a RIFF file")
    with pytest.raises(MalformedWav):
        load_wav(garbage)
    with pytest.raises(MalformedWav):
        load_wav(tmp_path / "missing.wav")


def test_resample():
    clip = AudioClip(np.random.default_rng(0).standard_normal(1000).astype(np.float32), 16000)
    same = resample(clip, 16000)
    assert np.array_equal(same.samples, clip.samples)  # identity at equal rates
    short = resample(AudioClip(np.ones(320, dtype=np.float32), 32000), 16000)
    assert (len(short), short.sample_rate) == (160, 16000)
    odd = resample(AudioClip(np.ones(441, dtype=np.float32), 44100), 16000)
    assert len(odd) == 160  # round(441 * 16000 / 44100)


def test_resample_keeps_tone_frequency():
    out = resample(AudioClip(_tone(440, 1.0, rate=48000), 48000), 16000)
    assert len(out) == 16000
    peak = np.argmax(np.abs(np.fft.rfft(out.samples)))  # 1 Hz per bin
    assert abs(peak - 440) <= 1


def test_trim_silence():
    tone = _tone(440, 0.5)
    clip = AudioClip(np.concatenate([tone, np.zeros(16000, np.float32), tone]), 16000)
    out = trim_silence(clip)
    assert abs(len(out) - 19200) <= 320  # 1.2 s +- one 20 ms frame
    assert np.array_equal(out.samples[:8000], tone)  # sound kept in order
    assert np.array_equal(out.samples[-8000:], tone)
    noise = AudioClip(
        np.random.default_rng(1).uniform(-0.5, 0.5, 16000).astype(np.float32), 16000
    )
    assert np.array_equal(trim_silence(noise).samples, noise.samples)  # no-op
    with pytest.raises(EmptyAfterTrim):
        trim_silence(AudioClip(np.zeros(16000, np.float32), 16000))


def test_trim_silence_keeps_short_gaps():
    tone = _tone(440, 0.5)
    gap = np.zeros(3200, np.float32)  # exactly 0.2 s
    clip = AudioClip(np.concatenate([tone, gap, tone]), 16000)
    assert len(trim_silence(clip)) == len(clip)


def test_normalize_length():
    assert np.array_equal(
        normalize_length(AudioClip(np.array([1, 2, 3], np.float32), 16000), 8).samples,
        [1, 2, 3, 1, 2, 3, 1, 2],
    )
    exact = AudioClip(np.arange(CLIP_LEN, dtype=np.float32), 16000)
    assert np.array_equal(normalize_length(exact).samples, exact.samples)
    longer = AudioClip(np.arange(CLIP_LEN + 1, dtype=np.float32), 16000)
    assert np.array_equal(normalize_length(longer).samples, longer.samples[:CLIP_LEN])
    rng = np.random.default_rng(2)
    for length in rng.integers(1, 10 * 1000, size=20):
        clip = AudioClip(np.ones(length, np.float32), 16000)
        assert len(normalize_length(clip, 1000)) == 1000
    with pytest.raises(InputTooShort):
        normalize_length(AudioClip(np.zeros(0, np.float32), 16000))


def _speech_like(rng):
    """alternating silences and tones of unaligned lengths"""
    parts = []
    silent = rng.random() < 0.5
    for _ in range(rng.integers(2, 7)):
        if silent:
            length = rng.integers(1, 9000)
            if rng.random() < 0.5:
                parts.append(np.zeros(length, np.float32))
            else:
                parts.append(rng.normal(0, 1e-5, length).astype(np.float32))
        else:
            parts.append(_tone(
                rng.uniform(100, 4000), rng.uniform(0.03, 0.8),
                amplitude=rng.uniform(0.05, 0.9),
            ))
        silent = not silent
    if not any(np.abs(part).max() > 1e-3 for part in parts):
        parts.append(_tone(440, 0.1))
    return np.concatenate(parts)


def test_preprocess_idempotent():
    tone = _tone(440, 0.5)
    clip = AudioClip(np.concatenate([tone, np.zeros(16000, np.float32), tone]), 16000)
    once = preprocess(clip)
    twice = preprocess(once)
    assert len(once) == CLIP_LEN
    assert np.array_equal(once.samples, twice.samples)

    edges = np.zeros(2400, np.float32)  # 0.15 s at both ends
    clip = AudioClip(np.concatenate([edges, tone, edges]), 16000)
    once = preprocess(clip)
    assert np.array_equal(once.samples, preprocess(once).samples)

    tiny = AudioClip(_tone(440, 0.005), 16000)  # shorter than a frame
    once = preprocess(tiny)
    assert np.array_equal(once.samples, preprocess(once).samples)


def test_preprocess_idempotent_random_clips():
    rng = np.random.default_rng(5)
    for _ in range(40):
        rate = int(rng.choice([16000, 22050]))
        clip_len = int(rng.choice([16000, CLIP_LEN]))
        clip = AudioClip(_speech_like(rng), rate)
        once = preprocess(clip, clip_len)
        twice = preprocess(once, clip_len)
        assert len(once) == clip_len
        assert np.array_equal(once.samples, twice.samples)


def test_trim_silence_wrap():
    tone = _tone(440, 0.5)
    clip = AudioClip(
        np.concatenate([np.zeros(2400, np.float32), tone, np.zeros(2500, np.float32)]),
        16000,
    )
    assert np.array_equal(trim_silence(clip).samples, clip.samples)
    looped = trim_silence(clip, wrap=True)
    assert len(looped) % 320 == 0
    # trailing and leading zeros together: 0.2 s plus the two boundary frames
    tail = len(looped) - 1 - np.flatnonzero(looped.samples)[-1]
    head = np.flatnonzero(looped.samples)[0]
    assert head + tail <= 3200 + 2 * 320
    assert np.array_equal(np.trim_zeros(looped.samples), np.trim_zeros(tone))


def test_split_into_chunks():
    clip = AudioClip(np.arange(150000, dtype=np.float32), 16000)
    chunks = split_into_chunks(clip, CLIP_LEN)
    assert chunks.shape == (3, CLIP_LEN)
    assert np.array_equal(chunks[1], clip.samples[CLIP_LEN: 2 * CLIP_LEN])
    assert chunks[2, 0] == 2 * CLIP_LEN  # last chunk starts where the second ends
    assert split_into_chunks(AudioClip(np.ones(10, np.float32), 16000), 100).shape == (1, 100)


# ---------- manifest.py ----------------
def test_build_manifest(tmp_path):
    _write_wavs(tmp_path / "ljspeech", 2)
    _write_wavs(tmp_path / "melgan", 3)
    manifest = build_manifest(tmp_path, {"ljspeech": "bonafide", "melgan": "melgan"})
    assert len(manifest) == 5
    assert manifest.counts()[BONAFIDE] == 2
    assert all(rec.split is None for rec in manifest.records)  # unsplit
    assert manifest.attacks == ["melgan"]
    with pytest.raises(NoBonafideDir):
        build_manifest(tmp_path, {"melgan": "melgan"})


def test_build_manifest_duplicates_and_empty_dirs(tmp_path):
    _write_wavs(tmp_path / "real", 1)
    shutil.copytree(tmp_path / "real", tmp_path / "copied")
    (tmp_path / "hifigan").mkdir()
    manifest = build_manifest(
        tmp_path, {"real": "bonafide", "copied": "pwg", "hifigan": "hifigan"}
    )
    assert len(manifest) == 2  # same file in two directories, two records
    assert len({rec.path for rec in manifest.records}) == 2
    assert manifest.empty_dirs == ["hifigan"]


def test_record_invariant():
    with pytest.raises(InvalidManifest):
        ManifestRecord("a.wav", BONAFIDE, "melgan")
    with pytest.raises(InvalidManifest):
        ManifestRecord("a.wav", FAKE, "bonafide")
    with pytest.raises(InvalidManifest):
        ManifestRecord("a.wav", FAKE, "melgan", "validation")


def test_split_sizes():
    assert split_sizes(100) == [70, 15, 15]
    assert split_sizes(10) == [7, 2, 1]  # test wins the 0.5 / 0.5 tie
    assert split_sizes(1) == [1, 0, 0]
    for count in range(50):
        assert sum(split_sizes(count)) == count


def test_split_manifest():
    manifest = DatasetManifest(_records(100))
    split = split_manifest(manifest, seed=0)
    assert Counter(rec.split for rec in split.records) == {"train": 70, "test": 15, "eval": 15}
    again = split_manifest(manifest, seed=0)
    assert [r.split for r in split.records] == [r.split for r in again.records]
    other = split_manifest(manifest, seed=1)
    assert [r.split for r in split.records] != [r.split for r in other.records]
    assert [r.path for r in split.records] == [r.path for r in manifest.records]  # order kept
    with pytest.raises(UsageError):
        split_manifest(manifest, (0.5, 0.5, 0.5))


def test_split_manifest_stratified():
    records = (
        _records(37, BONAFIDE, "bonafide")
        + _records(23, FAKE, "melgan")
        + _records(11, FAKE, "pwg")
    )
    split = split_manifest(DatasetManifest(records), seed=3)
    for attack, count in (("bonafide", 37), ("melgan", 23), ("pwg", 11)):
        got = Counter(rec.split for rec in split.records if rec.attack == attack)
        for name, ratio in zip(("train", "test", "eval"), (0.70, 0.15, 0.15)):
            assert abs(got[name] - count * ratio) <= 1


def test_oversample_balance():
    records = _records(3, split="train") + _records(1, BONAFIDE, "bonafide", "train")
    records += _records(2, split="eval", prefix="held")
    balanced = oversample_balance(DatasetManifest(records), "train", seed=0)
    counts = balanced.counts("train")
    assert counts[FAKE] == counts[BONAFIDE] == 3
    assert not Counter(records) - Counter(balanced.records)  # nothing removed
    assert balanced.split("eval") == records[4:]  # other splits untouched
    even = _records(2, split="train") + _records(2, BONAFIDE, "bonafide", "train")
    assert oversample_balance(DatasetManifest(even)).records == even
    with pytest.raises(MissingClass):
        oversample_balance(DatasetManifest(_records(3, split="train")))


def test_subsample_split():
    records = _records(100, split="train") + _records(20, split="eval", prefix="ev")
    kept = subsample_split(DatasetManifest(records), "train", 0.1, seed=0)
    assert len(kept.split("train")) == 10
    assert len(kept.split("eval")) == 20
    again = subsample_split(DatasetManifest(records), "train", 0.1, seed=0)
    assert kept.records == again.records


def test_subsample_split_keeps_every_group():
    records = (
        _records(90, split="train")
        + _records(30, attack="pwg", split="train")
        + _records(4, BONAFIDE, "bonafide", "train")
    )
    kept = subsample_split(DatasetManifest(records), "train", 0.1, seed=3)
    groups = Counter((rec.label, rec.attack) for rec in kept.split("train"))
    assert groups == {(FAKE, "melgan"): 9, (FAKE, "pwg"): 3, (BONAFIDE, "bonafide"): 1}


def test_manifest_csv(tmp_path, fake_manifest):
    path = tmp_path / "manifest.csv"
    write_manifest(fake_manifest, path)
    assert path.read_text().splitlines()[0] == "path,label,attack,split"
    assert read_manifest(path).records == fake_manifest.records
    fake_manifest.validate()  # every file exists
    (tmp_path / "bad.csv").write_text("file,kind\nx,y\n")
    with pytest.raises(InvalidManifest):
        read_manifest(tmp_path / "bad.csv")


# ---------- lfcc.py ----------------
CFG = LfccConfig()


def _naive_lfcc(samples, cfg=CFG):
    """O(n^2) DFT, loop-built triangles, explicit DCT-II"""
    win, hop, n_fft = cfg.win_len, cfg.hop_len, cfg.n_fft
    n_bins = n_fft // 2 + 1
    n = np.arange(win)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * n / win)
    dft = np.exp(-2j * np.pi * np.outer(n, np.arange(n_bins)) / n_fft)
    edges = np.linspace(cfg.f_min, cfg.f_max, cfg.n_filters + 2)
    bank = np.zeros((cfg.n_filters, n_bins))
    for i in range(cfg.n_filters):
        for k in range(n_bins):
            freq = k * cfg.sample_rate / n_fft
            if edges[i] < freq <= edges[i + 1]:
                bank[i, k] = (freq - edges[i]) / (edges[i + 1] - edges[i])
            elif edges[i + 1] < freq < edges[i + 2]:
                bank[i, k] = (edges[i + 2] - freq) / (edges[i + 2] - edges[i + 1])
    m = cfg.n_filters
    dct = np.array([
        [np.cos(np.pi * q * (2 * j + 1) / (2 * m)) for j in range(m)] for q in range(m)
    ]) * np.sqrt(2 / m)
    dct[0] /= np.sqrt(2)
    nb_frames = 1 + (len(samples) - win) // hop
    out = np.empty((cfg.n_lfcc, nb_frames))
    for f in range(nb_frames):
        frame = samples[f * hop: f * hop + win] * window
        power = np.abs(frame @ dft) ** 2
        energies = np.log(np.maximum(bank @ power, cfg.log_floor))
        out[:, f] = (dct @ energies)[: cfg.n_lfcc]
    return out


def test_frame_and_window():
    assert CFG.nb_frames(64600) == 402
    assert frame_and_window(np.zeros(400), CFG).shape == (1, 400)
    frames = frame_and_window(np.ones(1000), CFG)
    assert frames.shape == (4, 400)
    assert np.allclose(frames[2], hann_window(400))  # window identity
    assert hann_window(400)[0] == 0.0 and np.isclose(hann_window(400)[200], 1.0)
    with pytest.raises(InputTooShort):
        frame_and_window(np.zeros(399), CFG)


def test_power_spectrum():
    assert power_spectrum(np.zeros((1, 400))).shape == (1, 257)
    assert not power_spectrum(np.zeros((1, 400))).any()
    impulse = np.zeros((1, 400))
    impulse[0, 0] = 1.0
    assert np.allclose(power_spectrum(impulse), 1.0)
    sine = frame_and_window(_tone(1000, 400 / 16000, amplitude=1.0), CFG)
    assert np.argmax(power_spectrum(sine)[0]) == 32


def test_linear_filterbank():
    bank = linear_filterbank(CFG)
    assert bank.shape == (80, 257)
    assert (bank >= 0).all()
    edges = np.linspace(0, 8000, 82)
    freqs = np.arange(257) * 16000 / 512
    for idx, row in enumerate(bank):
        assert (row == row.max()).sum() == 1  # single peak
        outside = (freqs <= edges[idx]) | (freqs >= edges[idx + 2])
        assert not row[outside].any()
    assert ((bank[:-1] * bank[1:]).sum(axis=1) > 0).all()  # neighbours overlap
    total = bank[:, 1:-1].sum(axis=0)
    assert (total > 0).all() and (total <= 1.0001).all()


def test_lfcc_shapes():
    assert lfcc(np.zeros(CLIP_LEN)).shape == (1, 80, 402)
    assert lfcc(np.zeros(16000)).shape == (1, 80, 98)
    for length in (400, 401, 559, 560, 5000):
        assert lfcc(np.zeros(length)).shape[-1] == 1 + (length - 400) // 160
    batch = np.random.default_rng(4).uniform(-1, 1, (3, 2000))
    stacked = np.stack([lfcc(row) for row in batch])
    out = lfcc(batch)
    assert out.shape == (3, 1, 80, 11) and out.dtype == np.float32
    np.testing.assert_allclose(out, stacked, atol=1e-5)


def test_lfcc_silence():
    out = lfcc(np.zeros(4000))
    np.testing.assert_allclose(out[0, 0], np.log(1e-10) * np.sqrt(80), rtol=1e-6)
    np.testing.assert_allclose(out[0, 1:], 0.0, atol=1e-4)


def test_lfcc_deterministic():
    noise = np.random.default_rng(5).uniform(-1, 1, 16000)
    assert np.array_equal(lfcc(noise), lfcc(noise))


def test_lfcc_amplitude_covariance():
    noise = np.random.default_rng(6).uniform(-0.4, 0.4, 4000)
    base, louder = lfcc(noise).astype(np.float64), lfcc(2.0 * noise).astype(np.float64)
    np.testing.assert_allclose(
        louder[0, 0] - base[0, 0], 2 * np.log(2.0) * np.sqrt(80), atol=1e-3
    )
    np.testing.assert_allclose(louder[0, 1:], base[0, 1:], atol=1e-3)


def test_lfcc_time_shift():
    noise = np.random.default_rng(7).uniform(-1, 1, 3000)
    full = lfcc(noise)
    shifted = lfcc(noise[160:])
    np.testing.assert_allclose(full[..., 1:], shifted[..., : full.shape[-1] - 1], atol=1e-5)


def test_lfcc_matches_naive_reference():
    rng = np.random.default_rng(8)
    for _ in range(16):
        samples = rng.uniform(-1, 1, 1000)
        np.testing.assert_allclose(lfcc(samples)[0], _naive_lfcc(samples), atol=1e-4)


def test_lfcc_config_checks():
    with pytest.raises(ValueError):
        LfccConfig(win_ms=40)  # 640 samples > 512 FFT points
    with pytest.raises(ValueError):
        LfccConfig(n_lfcc=100)
    with pytest.raises(ValueError):
        LfccConfig(f_max=9000.0)
