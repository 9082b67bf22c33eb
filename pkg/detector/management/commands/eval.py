from detector.audio import CLIP_LEN
from detector.core import evaluate
from detector.management.base import DetectorCommand
from detector.manifest import SPLITS, read_manifest

from .train import split_tags


class Command(DetectorCommand):
    help = "EER / AUC of a checkpoint on one manifest split, as JSON"

    def add_arguments(self, parser):
        parser.add_argument("--checkpoint", required=True)
        parser.add_argument("--manifest", required=True)
        parser.add_argument("--split", choices=SPLITS, default="eval")
        parser.add_argument("--clip-len", type=int, default=CLIP_LEN)
        parser.add_argument("--exclude", help="comma-separated attack tags")
        parser.add_argument("--workers", type=int, default=0)
        parser.add_argument("--batch-size", type=int, default=128)
        parser.add_argument("--per-attack", action="store_true")
        parser.add_argument("--no-cache", action="store_true")

    def run(self, **options):
        report = evaluate(
            options["checkpoint"],
            read_manifest(options["manifest"]),
            split=options["split"],
            clip_len=options["clip_len"],
            excluded_attacks=split_tags(options["exclude"]) or frozenset(),
            workers=options["workers"],
            per_attack=options["per_attack"],
            batch_size=options["batch_size"],
            use_cache=not options["no_cache"],
        )
        return report.to_dict()
