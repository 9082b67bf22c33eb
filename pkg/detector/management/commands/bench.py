import logging

from detector.benchmark import log_reference
from detector.core import bench
from detector.management.base import DetectorCommand, parse_int_list


class Command(DetectorCommand):
    help = "CPU inference latency per batch size, as a JSON array of rows"

    def add_arguments(self, parser):
        parser.add_argument("--checkpoint", help="weights to time (fresh build if absent)")
        parser.add_argument("--batch-sizes", default="1,16,32")
        parser.add_argument("--iterations", type=int, default=1000)
        parser.add_argument("--measure-lfcc", action="store_true")
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--compare-reference", action="store_true")

    def run(self, **options):
        report = bench(
            options["checkpoint"],
            parse_int_list(options["batch_sizes"]),
            options["iterations"],
            options["measure_lfcc"],
            options["seed"],
        )
        logging.info(f"Timed on {report.device}")
        if options["compare_reference"]:
            log_reference(report)
        return report.to_list()
