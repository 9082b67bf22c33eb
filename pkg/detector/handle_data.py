import hashlib
import logging
import os
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from .audio import CLIP_LEN, TARGET_RATE, load_wav, preprocess
from .data_utility import file_hash
from .lfcc import LfccConfig, lfcc
from .weights import read_container, write_container

"""
To turn manifest records into LFCC batches for training and scoring

Main entry points: extract_features(), FeatureCache, make_loader()
"""

FEATURE_KEY = "lfcc"
CACHE_ENV = "SPECRNET_CACHE_DIR"
DEFAULT_CACHE_DIR = "~/.cache/specrnet"


def default_cache_dir():
    """SPECRNET_CACHE_DIR env, then Django setting, then ~/.cache/specrnet"""
    if os.environ.get(CACHE_ENV):
        return Path(os.environ[CACHE_ENV])
    from django.conf import settings

    if settings.configured and getattr(settings, CACHE_ENV, None):
        return Path(settings.SPECRNET_CACHE_DIR)
    return Path(DEFAULT_CACHE_DIR).expanduser()


def extract_features(path, cfg=None, clip_len=CLIP_LEN):
    """LFCC map of one WAV file after the preprocessing recipe

    Returns:
        (float32 array): (1, n_lfcc, N)
    """
    cfg = cfg or LfccConfig()
    clip = preprocess(load_wav(path), clip_len, cfg.sample_rate)
    return lfcc(clip.samples, cfg)


class FeatureCache:
    """LFCC maps stored on first touch, keyed by file content and settings"""

    def __init__(self, directory=None, cfg=None, clip_len=CLIP_LEN):
        self.directory = Path(directory) if directory else default_cache_dir()
        self.cfg = cfg or LfccConfig()
        self.clip_len = clip_len

    def key(self, path):
        settings = f"{file_hash(path)}|{self.cfg!r}|{self.clip_len}|{TARGET_RATE}"
        return hashlib.sha256(settings.encode("utf-8")).hexdigest()

    def location(self, path):
        key = self.key(path)
        return self.directory / key[:2] / f"{key}.srnw"

    def get(self, path):
        """cached features of -path, computed and stored when missing"""
        location = self.location(path)
        if location.is_file():
            return read_container(location)[FEATURE_KEY]
        features = extract_features(path, self.cfg, self.clip_len)
        write_container(location, {FEATURE_KEY: features})
        logging.debug(f"Features of {path} cached in {location}")
        return features


class ManifestDataset(Dataset):
    """(features, label, attack) per record, features (1, n_lfcc, N)"""

    def __init__(self, records, cfg=None, clip_len=CLIP_LEN, cache=None):
        self.records = list(records)
        self.cfg = cfg or LfccConfig()
        self.clip_len = clip_len
        self.cache = cache

    def __len__(self):
        return len(self.records)

    def __getitem__(self, idx):
        rec = self.records[idx]
        if self.cache is not None:
            features = self.cache.get(rec.path)
        else:
            features = extract_features(rec.path, self.cfg, self.clip_len)
        return torch.from_numpy(np.asarray(features)), float(rec.label), rec.attack


def collate(batch):
    """stacks (features, label, attack) triples into batch tensors"""
    features, labels, attacks = zip(*batch)
    return torch.stack(features), torch.tensor(labels, dtype=torch.float32), list(attacks)


def make_loader(records, batch_size, cfg=None, clip_len=CLIP_LEN, shuffle=False,
                seed=0, workers=0, cache=None):
    """DataLoader over manifest records, the last short batch kept

    shuffle (bool): seeded shuffling, same seed gives the same order
    workers (int): parallel feature-extraction processes (0: in process)
    """
    dataset = ManifestDataset(records, cfg, clip_len, cache)
    generator = torch.Generator().manual_seed(seed) if shuffle else None
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        generator=generator,
        num_workers=workers,
        collate_fn=collate,
        drop_last=False,
    )
