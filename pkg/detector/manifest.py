"""
Dataset manifests: which WAV file is bonafide or which attack, and in
which split (train / test / eval) it lives.

CSV layout: path,label,attack,split  (split is "unset" before splitting)
"""

import csv
import logging
import math
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .data_utility import atomic_write
from .exceptions import (
    InvalidManifest,
    MissingClass,
    NoBonafideDir,
    UsageError,
)

BONAFIDE, FAKE = 0, 1
LABEL_NAMES = {BONAFIDE: "bonafide", FAKE: "fake"}
LABEL_VALUES = {name: value for value, name in LABEL_NAMES.items()}
BONAFIDE_TAG = "bonafide"
SPLITS = ("train", "test", "eval")
UNSET = "unset"
DEFAULT_RATIOS = (0.70, 0.15, 0.15)
CSV_HEADER = ["path", "label", "attack", "split"]


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: int
    attack: str
    split: Optional[str] = None

    def __post_init__(self):
        if (self.label == BONAFIDE) != (self.attack == BONAFIDE_TAG):
            raise InvalidManifest(
                f"{self.path}: label {self.label} does not match attack '{self.attack}'"
            )
        if self.split is not None and self.split not in SPLITS:
            raise InvalidManifest(f"{self.path}: unknown split '{self.split}'")


@dataclass
class DatasetManifest:
    records: List[ManifestRecord]
    seed: Optional[int] = None
    empty_dirs: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def split(self, name):
        """records of one split, in manifest order"""
        return [rec for rec in self.records if rec.split == name]

    @property
    def attacks(self):
        """sorted attack tags of the fake records"""
        return sorted({rec.attack for rec in self.records if rec.label == FAKE})

    def counts(self, split=None):
        """Counter of labels, over one split or the whole manifest"""
        records = self.records if split is None else self.split(split)
        return Counter(rec.label for rec in records)

    def without_attacks(self, tags):
        """copy without the records of the given attack tags"""
        tags = set(tags)
        return replace(
            self, records=[rec for rec in self.records if rec.attack not in tags]
        )

    def validate(self):
        """Checks every record's audio file exists"""
        missing = [rec.path for rec in self.records if not Path(rec.path).is_file()]
        if missing:
            raise InvalidManifest(
                f"{len(missing)} missing audio files, first: {missing[0]}"
            )


def _stratum_rng(seed, *key):
    """random generator depending only on seed and stratum key"""
    salt = zlib.crc32("/".join(map(str, key)).encode("utf-8"))
    return np.random.default_rng([seed, salt])


# ------------ building ------------
def build_manifest(root, attack_layout):
    """One record per WAV file found under the mapped directories

    root (str or Path): dataset root
    attack_layout (dict): {directory name: attack tag}, exactly one
                            directory mapped to "bonafide"

    Returns:
        (DatasetManifest): unsplit records; empty attack directories are
                            listed in empty_dirs
    """
    nb_bonafide_dirs = sum(tag == BONAFIDE_TAG for tag in attack_layout.values())
    if nb_bonafide_dirs != 1:
        raise NoBonafideDir(
            f"expected exactly one directory mapped to '{BONAFIDE_TAG}', "
            f"got {nb_bonafide_dirs}"
        )
    root = Path(root)
    records, empty_dirs = [], []
    for directory in sorted(attack_layout):
        attack = attack_layout[directory]
        label = BONAFIDE if attack == BONAFIDE_TAG else FAKE
        folder = root / directory
        wavs = (
            sorted(p for p in folder.rglob("*") if p.suffix.lower() == ".wav")
            if folder.is_dir() else []
        )
        if not wavs:
            logging.warning(f"EmptyAttackDir: no WAV file in {folder}")
            empty_dirs.append(directory)
        records += [ManifestRecord(str(p), label, attack) for p in wavs]
    logging.info(
        f"Manifest built: {len(records)} records from {len(attack_layout)} directories"
    )
    return DatasetManifest(records, empty_dirs=empty_dirs)


# ------------ splitting ------------
def split_sizes(count, ratios=DEFAULT_RATIOS):
    """Largest-remainder apportionment of count records into the splits

    Every split gets floor(count * ratio); leftovers go to the largest
    fractional parts, ties resolved train, test, eval.

    Returns:
        (int list): one size per split
    """
    exact = [count * ratio for ratio in ratios]
    sizes = [math.floor(value + 1e-9) for value in exact]
    order = sorted(
        range(len(ratios)), key=lambda idx: (-round(exact[idx] - sizes[idx], 9), idx)
    )
    for idx in order[: count - sum(sizes)]:
        sizes[idx] += 1
    return sizes


def split_manifest(manifest, ratios=DEFAULT_RATIOS, seed=0):
    """Stratified (label, attack) split into train / test / eval

    manifest (DatasetManifest): records to split (previous split ignored)
    ratios (float triple): train, test, eval fractions
    seed (int): unsigned seed, same seed gives the same assignment

    Returns:
        (DatasetManifest): same records, in order, with split set
    """
    if len(ratios) != len(SPLITS) or abs(sum(ratios) - 1.0) > 1e-9:
        raise UsageError(f"split ratios must be 3 values summing to 1, got {ratios}")

    strata = defaultdict(list)
    for idx, rec in enumerate(manifest.records):
        strata[(rec.label, rec.attack)].append(idx)

    assignment = {}
    for (label, attack), idxs in sorted(strata.items()):
        idxs = sorted(idxs, key=lambda idx: manifest.records[idx].path)
        perm = _stratum_rng(seed, label, attack).permutation(len(idxs))
        start = 0
        for name, size in zip(SPLITS, split_sizes(len(idxs), ratios)):
            for pos in perm[start: start + size]:
                assignment[idxs[pos]] = name
            start += size

    records = [
        replace(rec, split=assignment[idx]) for idx, rec in enumerate(manifest.records)
    ]
    return DatasetManifest(records, seed=seed, empty_dirs=list(manifest.empty_dirs))


def require_classes(records, split):
    """Groups the records of a split by label, each label present

    Returns:
        (dict): {label: records}
    """
    by_label = {
        label: [rec for rec in records if rec.label == label] for label in LABEL_NAMES
    }
    for label, recs in by_label.items():
        if not recs:
            raise MissingClass(f"split '{split}' has no {LABEL_NAMES[label]} record")
    return by_label


def oversample_balance(manifest, split="train", seed=0):
    """Duplicates minority-class records of one split until classes match

    Duplicates are drawn with replacement and appended after the
    original records, which are all kept.

    Returns:
        (DatasetManifest): balanced manifest
    """
    by_label = require_classes(manifest.split(split), split)

    minority, majority = sorted(by_label.values(), key=len)
    deficit = len(majority) - len(minority)
    if deficit == 0:
        return replace(manifest, records=list(manifest.records))
    picks = _stratum_rng(seed, split).choice(len(minority), size=deficit, replace=True)
    logging.info(
        f"Oversampling {deficit} {LABEL_NAMES[minority[0].label]} records in {split}"
    )
    return replace(
        manifest, records=list(manifest.records) + [minority[idx] for idx in picks]
    )


def subsample_split(manifest, split, fraction, seed=0):
    """Keeps round(fraction * n) records of each (label, attack) group of a
    split (at least one per group), the other splits untouched"""
    if fraction >= 1.0:
        return manifest
    groups = defaultdict(list)
    for idx, rec in enumerate(manifest.records):
        if rec.split == split:
            groups[(rec.label, rec.attack)].append(idx)

    kept = set()
    for (label, attack), idxs in sorted(groups.items()):
        keep_nb = max(1, int(round(fraction * len(idxs))))
        rng = _stratum_rng(seed, split, "subsample", label, attack)
        picks = rng.choice(len(idxs), size=keep_nb, replace=False)
        kept.update(np.asarray(idxs)[picks].tolist())
    records = [
        rec for idx, rec in enumerate(manifest.records)
        if rec.split != split or idx in kept
    ]
    return replace(manifest, records=records)


# ------------ csv files ------------
def write_manifest(manifest, path):
    """Writes the manifest CSV atomically"""
    with atomic_write(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for rec in manifest.records:
            writer.writerow(
                [rec.path, LABEL_NAMES[rec.label], rec.attack, rec.split or UNSET]
            )


def read_manifest(path):
    """Reads a manifest CSV written by write_manifest()"""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise InvalidManifest(f"{path}: bad header {header}")
            records = [
                ManifestRecord(
                    row[0],
                    LABEL_VALUES[row[1]],
                    row[2],
                    None if row[3] == UNSET else row[3],
                )
                for row in reader
                if row
            ]
    except (KeyError, IndexError) as err:
        raise InvalidManifest(f"{path}: malformed row ({err})") from err
    except OSError as err:
        raise InvalidManifest(f"{path}: {err}") from err
    return DatasetManifest(records)
