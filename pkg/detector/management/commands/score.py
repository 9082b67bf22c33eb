from detector.audio import CLIP_LEN
from detector.core import DEFAULT_THRESHOLD, score_chunks, score_file
from detector.management.base import DetectorCommand


class Command(DetectorCommand):
    help = "Scores one WAV file: {score, verdict} with fake iff score >= threshold"

    def add_arguments(self, parser):
        parser.add_argument("--checkpoint", required=True)
        parser.add_argument("--input", required=True, help="WAV file")
        parser.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
        parser.add_argument("--clip-len", type=int, default=CLIP_LEN)
        parser.add_argument(
            "--chunked", action="store_true", help="score every clip-long window"
        )

    def run(self, **options):
        scorer = score_chunks if options["chunked"] else score_file
        return scorer(
            options["checkpoint"], options["input"], options["threshold"], options["clip_len"]
        )
