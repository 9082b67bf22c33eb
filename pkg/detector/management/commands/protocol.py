import logging

from detector.core import run_protocol
from detector.exceptions import UsageError
from detector.management.base import DetectorCommand, parse_int_list
from detector.manifest import read_manifest

from .train import add_train_arguments, resolve_config

"""
Runs one benchmark protocol over several seeds

Protocols:
- full: default configuration
- limited_attacks: one scenario per attack, that attack left out everywhere
- short_utterances: 1 s clips (16000 samples) for training and evaluation
- data_scarcity: 10% of train and test, 4 epochs, full eval split

USAGE:
- run "python manage.py protocol --name data_scarcity --manifest m.csv --seeds 1,2,3"
- "--name" and "--seeds" may also come from the "protocol" / "seeds" keys of --config
- "--dry-run" prints the resolved configuration and planned runs only
"""

DEFAULT_SEEDS = (1, 2, 3)


class Command(DetectorCommand):
    help = "Trains and evaluates a protocol over seeds, reporting mean and std"

    def add_arguments(self, parser):
        parser.add_argument("--name", help="protocol name")
        parser.add_argument("--seeds", help="comma-separated seeds (default 1,2,3)")
        parser.add_argument("--with-reference", action="store_true")
        parser.add_argument("--dry-run", action="store_true")
        add_train_arguments(parser)

    def run(self, **options):
        cfg, protocol, seeds = resolve_config(self, options)
        name = options["name"] or protocol
        if name is None:
            raise UsageError("a protocol name is needed (--name or the config 'protocol' key)")
        if options["seeds"]:
            seeds = parse_int_list(options["seeds"])
        seeds = list(seeds) if seeds is not None else list(DEFAULT_SEEDS)
        manifest = read_manifest(options["manifest"])
        report = run_protocol(
            name, manifest, cfg, seeds,
            with_reference=options["with_reference"],
            dry_run=options["dry_run"],
            use_cache=not options["no_cache"],
            verb=options["verbosity"],
        )
        logging.info(f"Protocol {name}: {len(report['planned_runs'])} runs")
        return report
