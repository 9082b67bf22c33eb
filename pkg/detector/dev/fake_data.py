import logging
from pathlib import Path

import numpy as np
from scipy import signal

from ..audio import TARGET_RATE, AudioClip, save_wav

"""
Synthetic WAV trees for tests and dev runs

"bonafide" clips are voiced-speech stand-ins (harmonic sinusoids under a
syllable-rate envelope), fake clips are noise shaped per attack tag.
"""

ATTACK_FILTERS = {
    "melgan": None,  # white noise
    "pwg": ("lowpass", 2000),
    "waveglow": ("highpass", 3000),
    "hifigan": ("bandpass", (500, 4000)),
}


# ----------- fake audio generation ---------------
def fake_bonafide(rng, length, rate=TARGET_RATE):
    """harmonic tone with a random pitch and a slow amplitude envelope"""
    t = np.arange(length) / rate
    pitch = rng.uniform(90, 250)
    voiced = sum(
        rng.uniform(0.2, 1.0) / harmonic * np.sin(2 * np.pi * pitch * harmonic * t
                                                  + rng.uniform(0, 2 * np.pi))
        for harmonic in range(1, 6)
    )
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(2, 5) * t)
    samples = voiced * envelope
    return (0.5 * samples / np.abs(samples).max()).astype(np.float32)


def fake_attack(rng, length, attack, rate=TARGET_RATE):
    """noise clip, band-shaped according to the attack tag"""
    noise = rng.standard_normal(length)
    shape = ATTACK_FILTERS.get(attack)
    if shape is not None:
        kind, cutoff = shape
        sos = signal.butter(6, cutoff, btype=kind, fs=rate, output="sos")
        noise = signal.sosfilt(sos, noise)
    return (0.5 * noise / np.abs(noise).max()).astype(np.float32)


def generate_tree(root, nb_bonafide=8, nb_per_attack=4, attacks=("melgan", "pwg"),
                  length=TARGET_RATE, rate=TARGET_RATE, seed=0):
    """Writes root/bonafide/*.wav and root/<attack>/*.wav

    root (str or Path): destination directory
    nb_bonafide (int): number of bonafide clips
    nb_per_attack (int): number of clips per attack directory
    attacks (str list): attack tags, also used as directory names
    length (int): clip length in samples

    Returns:
        (dict): attack layout {directory: tag} for build_manifest()
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    layout = {"bonafide": "bonafide"}
    (root / "bonafide").mkdir(parents=True, exist_ok=True)
    for idx in range(nb_bonafide):
        clip = AudioClip(fake_bonafide(rng, length, rate), rate)
        save_wav(root / "bonafide" / f"bonafide_{idx:04d}.wav", clip)
    for attack in attacks:
        (root / attack).mkdir(parents=True, exist_ok=True)
        layout[attack] = attack
        for idx in range(nb_per_attack):
            clip = AudioClip(fake_attack(rng, length, attack, rate), rate)
            save_wav(root / attack / f"{attack}_{idx:04d}.wav", clip)
    logging.info(
        f"Fake tree in {root}: {nb_bonafide} bonafide, "
        f"{nb_per_attack} x {len(attacks)} fake clips"
    )
    return layout
