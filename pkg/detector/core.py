import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from time import time
from typing import List

import gin
import numpy as np

from .audio import CLIP_LEN, load_wav, resample, split_into_chunks, trim_silence
from .benchmark import bench_inference
from .exceptions import EmptySplit, UnknownProtocol, UsageError
from .handle_data import FeatureCache, extract_features, make_loader
from .lfcc import LfccConfig, lfcc
from .manifest import oversample_balance, require_classes, subsample_split
from .metrics import evaluate_scores
from .model import build, score_batch
from .trainer import Trainer, TrainConfig, score_loader
from .weights import load_weights

"""
Experiment orchestration: training runs, evaluation, benchmark protocols
and single-file scoring. Used by the management commands.

Main entry points: train(), evaluate(), run_protocol(), score_file()
"""

PROTOCOLS = ("full", "limited_attacks", "short_utterances", "data_scarcity")
SHORT_CLIP_LEN = 16000  # 1 s at 16 kHz
SCARCITY_FRACTION = 0.1
SCARCITY_EPOCHS = 4
DEFAULT_THRESHOLD = 0.5


@dataclass
class TrainResult:
    best_checkpoint: str
    best_epoch: int
    log_path: str
    log: List[dict] = field(default_factory=list)
    n_train: int = 0
    n_test: int = 0

    def to_dict(self):
        return {
            "best_checkpoint": self.best_checkpoint,
            "best_epoch": self.best_epoch,
            "log_path": self.log_path,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "log": self.log,
        }


def _cache(clip_len, use_cache, cache_dir=None):
    return FeatureCache(cache_dir, LfccConfig(), clip_len) if use_cache else None


def _nonempty(records, split):
    if not records:
        raise EmptySplit(f"split '{split}' has no record")
    return records


# ------------ training ------------
def prepare_manifest(manifest, cfg):
    """Applies exclusions, subsampling and train balancing of a run

    excluded attacks leave every split; train_fraction keeps a seeded share
    of each (label, attack) group of train and test (eval untouched); both
    splits must still hold both classes; train is then oversampled.
    """
    manifest = manifest.without_attacks(cfg.excluded_attacks)
    for split in ("train", "test"):
        manifest = subsample_split(manifest, split, cfg.train_fraction, cfg.seed)
        require_classes(_nonempty(manifest.split(split), split), split)
    return oversample_balance(manifest, "train", cfg.seed)


def _resume_epoch(checkpoint):
    """epoch number encoded in a checkpoint name, 0 if none"""
    found = re.search(r"epoch_(\d+)", Path(checkpoint).name)
    return int(found.group(1)) if found else 0


def train(manifest, cfg, resume=None, use_cache=True, cache_dir=None, verb=1):
    """Trains SpecRNet on a split manifest

    manifest (DatasetManifest): manifest with train / test / eval splits
    cfg (TrainConfig): run configuration
    resume (str): checkpoint to continue from, epochs counted after it

    Returns:
        (TrainResult): best checkpoint (lowest test EER) and per-epoch log
    """
    start = time()
    prepared = prepare_manifest(manifest, cfg)
    train_records, test_records = prepared.split("train"), prepared.split("test")
    cache = _cache(cfg.clip_len, use_cache, cache_dir)
    loader_args = dict(clip_len=cfg.clip_len, workers=cfg.workers, cache=cache)
    train_loader = make_loader(
        train_records, cfg.batch_size, shuffle=True, seed=cfg.seed, **loader_args
    )
    test_loader = make_loader(test_records, cfg.batch_size, **loader_args)
    logging.info(
        f"Training on {len(train_records)} records, validating on {len(test_records)}"
    )

    trainer = Trainer(cfg, resume=resume, verb=verb)
    first_epoch = _resume_epoch(resume) + 1 if resume else 1
    best, best_epoch = trainer.train(train_loader, test_loader, first_epoch)
    rows = trainer.log_rows(first_epoch)
    log_path = trainer.write_log(rows)
    logging.info(f"train() total time : {round(time() - start)}s")
    return TrainResult(
        best, best_epoch, log_path, rows, len(train_records), len(test_records)
    )


# ------------ evaluation ------------
def evaluate(checkpoint, manifest, split="eval", clip_len=CLIP_LEN,
             excluded_attacks=frozenset(), workers=0, per_attack=False,
             batch_size=128, use_cache=True, cache_dir=None):
    """EER / AUC of a checkpoint on one split of a manifest

    Returns:
        (EvalReport): metrics (with per-attack EERs if -per_attack)
    """
    excluded = frozenset(excluded_attacks)
    model = checkpoint if hasattr(checkpoint, "forward") else load_weights(checkpoint)
    records = _nonempty(manifest.without_attacks(excluded).split(split), split)
    loader = make_loader(
        records, batch_size, clip_len=clip_len, workers=workers,
        cache=_cache(clip_len, use_cache, cache_dir),
    )
    scores, labels, attacks = score_loader(model, loader, excluded)
    report = evaluate_scores(scores, labels, attacks if per_attack else None)
    logging.info(
        f"{split}: EER {report.eer_percent:.2f}%, AUC {report.auc_percent:.2f}% "
        f"on {len(records)} records"
    )
    return report


# ------------ protocols ------------
def plan_protocol(name, manifest, base_cfg, seeds, with_reference=False):
    """(scenario, TrainConfig) pairs of a protocol, one per seed and scenario

    Returns:
        (list): [(scenario name, cfg)] in run order
    """
    if name not in PROTOCOLS:
        raise UnknownProtocol(f"unknown protocol '{name}', expected one of {PROTOCOLS}")
    if not seeds:
        raise UsageError("at least one seed is needed")
    root = Path(base_cfg.checkpoint_dir) / name

    if name == "limited_attacks":
        scenarios = [
            (f"without_{tag}", {"excluded_attacks": base_cfg.excluded_attacks | {tag}})
            for tag in manifest.without_attacks(base_cfg.excluded_attacks).attacks
        ]
        if with_reference:
            scenarios.insert(0, ("full", {}))
    elif name == "short_utterances":
        scenarios = [(name, {"clip_len": SHORT_CLIP_LEN})]
    elif name == "data_scarcity":
        scenarios = [(name, {"train_fraction": SCARCITY_FRACTION, "epochs": SCARCITY_EPOCHS})]
    else:
        scenarios = [("full", {})]

    return [
        (
            scenario,
            replace(
                base_cfg,
                seed=seed,
                checkpoint_dir=str(root / scenario / f"seed_{seed}"),
                **overrides,
            ),
        )
        for scenario, overrides in scenarios
        for seed in seeds
    ]


def _aggregate(values):
    values = np.asarray(values, dtype=np.float64)
    return float(values.mean()), float(values.std())  # population std


def run_protocol(name, manifest, base_cfg, seeds, with_reference=False, dry_run=False,
                 use_cache=True, cache_dir=None, verb=1):
    """Trains and evaluates every run of a protocol

    Evaluation uses the run's clip length and excluded attacks on the full
    eval split.

    Returns:
        (dict): per scenario the runs and the mean / std of EER and AUC;
                for limited_attacks also the std of the scenario mean EERs
    """
    plan = plan_protocol(name, manifest, base_cfg, seeds, with_reference)
    report = {
        "protocol": name,
        "seeds": list(seeds),
        "config": plan[0][1].to_dict(),
        "planned_runs": [
            {"scenario": scenario, "seed": cfg.seed, "config": cfg.to_dict()}
            for scenario, cfg in plan
        ],
    }
    if dry_run:
        return report

    runs = {}
    for scenario, cfg in plan:
        logging.info(f"PROTOCOL {name}: {scenario}, seed {cfg.seed}")
        result = train(manifest, cfg, use_cache=use_cache, cache_dir=cache_dir, verb=verb)
        metrics = evaluate(
            result.best_checkpoint, manifest, "eval", cfg.clip_len,
            cfg.excluded_attacks, cfg.workers, batch_size=cfg.batch_size,
            use_cache=use_cache, cache_dir=cache_dir,
        )
        runs.setdefault(scenario, []).append(
            {
                "seed": cfg.seed,
                "best_checkpoint": result.best_checkpoint,
                "eer_percent": metrics.eer_percent,
                "auc_percent": metrics.auc_percent,
            }
        )

    report["scenarios"] = []
    for scenario, scenario_runs in runs.items():
        eer_mean, eer_std = _aggregate([run["eer_percent"] for run in scenario_runs])
        auc_mean, auc_std = _aggregate([run["auc_percent"] for run in scenario_runs])
        report["scenarios"].append({
            "scenario": scenario,
            "runs": scenario_runs,
            "eer_mean": eer_mean,
            "eer_std": eer_std,
            "auc_mean": auc_mean,
            "auc_std": auc_std,
        })
    if name == "limited_attacks":
        means = [s["eer_mean"] for s in report["scenarios"] if s["scenario"] != "full"]
        report["eer_spread"] = _aggregate(means)[1]
    return report


# ------------ configuration files ------------
def load_run_config(path):
    """Reads a JSON run configuration

    Keys are TrainConfig fields plus optional "protocol" and "seeds".

    Returns:
        (dict): TrainConfig overrides
        (str): protocol name or None
        (int list): seeds or None
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            content = json.load(f)
    except (OSError, json.JSONDecodeError) as err:
        raise UsageError(f"unreadable run configuration {path}: {err}") from err
    if not isinstance(content, dict):
        raise UsageError(f"{path}: a JSON object is expected")
    protocol = content.pop("protocol", None)
    seeds = content.pop("seeds", None)
    known = set(TrainConfig.__dataclass_fields__)
    unknown = sorted(set(content) - known)
    if unknown:
        raise UsageError(f"{path}: unknown configuration keys {unknown}")
    if "excluded_attacks" in content:
        content["excluded_attacks"] = frozenset(content["excluded_attacks"])
    return content, protocol, seeds


def make_train_config(overrides=None, **kwargs):
    """TrainConfig from gin defaults, then file overrides, then -kwargs"""
    values = dict(overrides or {})
    values.update({key: val for key, val in kwargs.items() if val is not None})
    return TrainConfig(**values)


# ------------ scoring ------------
def verdict(score, threshold=DEFAULT_THRESHOLD):
    """"fake" iff score >= threshold"""
    return "fake" if score >= threshold else "bonafide"


def score_file(checkpoint, path, threshold=DEFAULT_THRESHOLD, clip_len=CLIP_LEN):
    """Fake probability and verdict of one WAV file

    Returns:
        (dict): {"score", "verdict"}
    """
    model = checkpoint if hasattr(checkpoint, "forward") else load_weights(checkpoint)
    features = extract_features(path, clip_len=clip_len)
    score = float(score_batch(model, features[None])[0])
    return {"score": score, "verdict": verdict(score, threshold)}


def score_chunks(checkpoint, path, threshold=DEFAULT_THRESHOLD, clip_len=CLIP_LEN):
    """Scores a long recording window by window in one batched forward

    The recording is resampled and its silences shortened, then cut into
    clip_len windows; the verdict is given on the highest window score.

    Returns:
        (dict): {"chunk_scores", "max_score", "mean_score", "score", "verdict"}
    """
    model = checkpoint if hasattr(checkpoint, "forward") else load_weights(checkpoint)
    cfg = LfccConfig()
    clip = trim_silence(resample(load_wav(path), cfg.sample_rate))
    chunks = split_into_chunks(clip, clip_len)
    scores = score_batch(model, lfcc(chunks, cfg)).double().numpy()
    top = float(scores.max())
    return {
        "chunk_scores": scores.tolist(),
        "max_score": top,
        "mean_score": float(scores.mean()),
        "score": top,
        "verdict": verdict(top, threshold),
    }


# ------------ benchmark ------------
def bench(checkpoint=None, batch_sizes=(1, 16, 32), iterations=1000, measure_lfcc=False,
          seed=0):
    """bench_inference() on a checkpoint, or on a fresh build when None"""
    model = load_weights(checkpoint) if checkpoint else build(seed=seed)
    return bench_inference(model, batch_sizes, iterations, measure_lfcc, seed=seed)


# parse parameters written in "hyperparameters.gin"
gin.parse_config_file(str(Path(__file__).resolve().parent / "hyperparameters.gin"))
