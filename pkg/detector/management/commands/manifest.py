import json
from pathlib import Path

from detector.exceptions import UsageError
from detector.management.base import DetectorCommand, parse_float_list
from detector.manifest import (
    DEFAULT_RATIOS,
    LABEL_NAMES,
    SPLITS,
    build_manifest,
    oversample_balance,
    split_manifest,
    write_manifest,
)

"""
Builds, splits and optionally balances a dataset manifest

USAGE:
- run "python manage.py manifest --root data/ --layout layout.json"
- without --layout, every subdirectory of the root is an attack named
    after it, and the "bonafide" directory holds bona fide speech
"""


def read_layout(value, root):
    """{directory: attack tag} from a JSON string, a JSON file or the root"""
    if value is None:
        return {p.name: p.name for p in sorted(Path(root).iterdir()) if p.is_dir()}
    try:
        text = Path(value).read_text(encoding="utf-8") if Path(value).is_file() else value
        layout = json.loads(text)
    except (OSError, json.JSONDecodeError) as err:
        raise UsageError(f"unreadable --layout: {err}") from err
    if not isinstance(layout, dict):
        raise UsageError("--layout must be a JSON object {directory: attack tag}")
    return layout


class Command(DetectorCommand):
    help = "Builds a manifest CSV of a WAV tree, split train/test/eval"

    def add_arguments(self, parser):
        parser.add_argument("--root", required=True, help="dataset root directory")
        parser.add_argument("--layout", help="JSON {directory: attack tag} or JSON file")
        parser.add_argument("--ratios", default=",".join(map(str, DEFAULT_RATIOS)))
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--balance", choices=SPLITS, help="split to oversample")
        parser.add_argument("--out", default="manifest.csv", help="manifest CSV path")

    def run(self, **options):
        root = Path(options["root"])
        if not root.is_dir():
            raise UsageError(f"--root {root} is not a directory")
        layout = read_layout(options["layout"], root)
        manifest = build_manifest(root, layout)
        manifest = split_manifest(manifest, parse_float_list(options["ratios"]), options["seed"])
        if options["balance"]:
            manifest = oversample_balance(manifest, options["balance"], options["seed"])
        write_manifest(manifest, options["out"])
        return {
            "manifest": str(options["out"]),
            "records": len(manifest),
            "counts": {
                split: {
                    LABEL_NAMES[label]: manifest.counts(split)[label] for label in LABEL_NAMES
                }
                for split in SPLITS
            },
            "attacks": manifest.attacks,
            "empty_dirs": manifest.empty_dirs,
        }
