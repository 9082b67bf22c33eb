from detector.benchmark import REFERENCE_PARAMETERS
from detector.management.base import DetectorCommand
from detector.model import build, component_counts, count_parameters
from detector.weights import load_weights


class Command(DetectorCommand):
    help = "Trainable parameter count of a checkpoint (or of a fresh build)"

    def add_arguments(self, parser):
        parser.add_argument("--checkpoint")
        parser.add_argument("--params", action="store_true", help="total count")
        parser.add_argument("--breakdown", action="store_true", help="count per component")
        parser.add_argument("--reference", action="store_true", help="published totals")
        parser.add_argument("--seed", type=int, default=0)

    def run(self, **options):
        model = (
            load_weights(options["checkpoint"]) if options["checkpoint"]
            else build(seed=options["seed"])
        )
        show_all = not (options["params"] or options["breakdown"] or options["reference"])
        info = {}
        if options["params"] or show_all:
            info["trainable_parameters"] = count_parameters(model)
        if options["breakdown"] or show_all:
            info["breakdown"] = component_counts(model)
        if options["reference"]:
            info["reference"] = REFERENCE_PARAMETERS
        return info
