from detector.core import load_run_config, make_train_config, train
from detector.management.base import DetectorCommand
from detector.manifest import read_manifest

"""
Trains SpecRNet on the train split of a manifest

USAGE:
- run "python manage.py train --manifest manifest.csv --config run.json --seed 1"
- one checkpoint per epoch and a CSV log land in the checkpoint directory
- "--resume <checkpoint>" continues from a checkpoint and its optimizer state
"""


def split_tags(value):
    return frozenset(tag for tag in value.split(",") if tag) if value else None


def train_overrides(options):
    """TrainConfig values given on the command line (None when absent)"""
    return dict(
        seed=options.get("seed"),
        epochs=options.get("epochs"),
        batch_size=options.get("batch_size"),
        lr=options.get("lr"),
        clip_len=options.get("clip_len"),
        train_fraction=options.get("train_fraction"),
        excluded_attacks=split_tags(options.get("exclude")),
        workers=options.get("workers"),
        checkpoint_dir=options.get("checkpoint_dir"),
    )


def resolve_config(command, options):
    """gin defaults < --config file < command-line flags"""
    overrides, protocol, seeds = (
        load_run_config(options["config"]) if options.get("config") else ({}, None, None)
    )
    flags = train_overrides(options)
    if flags["checkpoint_dir"] is None and "checkpoint_dir" not in overrides:
        flags["checkpoint_dir"] = command.checkpoint_dir()
    return make_train_config(overrides, **flags), protocol, seeds


def add_train_arguments(parser):
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--checkpoint-dir")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--clip-len", type=int)
    parser.add_argument("--train-fraction", type=float)
    parser.add_argument("--exclude", help="comma-separated attack tags")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--no-cache", action="store_true")


class Command(DetectorCommand):
    help = "Trains SpecRNet and keeps the checkpoint with the lowest test EER"

    def add_arguments(self, parser):
        add_train_arguments(parser)
        parser.add_argument("--seed", type=int)
        parser.add_argument("--resume", help="checkpoint to continue from")

    def run(self, **options):
        cfg, _, _ = resolve_config(self, options)
        manifest = read_manifest(options["manifest"])
        result = train(
            manifest, cfg, resume=options["resume"], use_cache=not options["no_cache"],
            verb=options["verbosity"],
        )
        return {"config": cfg.to_dict(), **result.to_dict()}
