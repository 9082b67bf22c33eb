from detector.audio import CLIP_LEN
from detector.handle_data import FeatureCache, make_loader
from detector.management.base import DetectorCommand
from detector.manifest import read_manifest

"""
Computes the LFCC map of every manifest record into a feature directory

Files are keyed by audio content and front-end settings, so a rerun
leaves existing files untouched.
"""


class Command(DetectorCommand):
    help = "Extracts LFCC features of every manifest record"

    def add_arguments(self, parser):
        parser.add_argument("--manifest", required=True)
        parser.add_argument("--out-dir", required=True)
        parser.add_argument("--clip-len", type=int, default=CLIP_LEN)
        parser.add_argument("--workers", type=int, default=0)

    def run(self, **options):
        manifest = read_manifest(options["manifest"])
        cache = FeatureCache(options["out_dir"], clip_len=options["clip_len"])
        loader = make_loader(
            manifest.records, 1, clip_len=options["clip_len"],
            workers=options["workers"], cache=cache,
        )
        shapes = {}
        for (features, _, _), rec in zip(loader, manifest.records):
            shapes[rec.path] = list(features.shape[1:])
        return {
            "features": {rec.path: str(cache.location(rec.path)) for rec in manifest.records},
            "shape": next(iter(shapes.values()), None),
        }
