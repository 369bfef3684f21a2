import json

from django.core.management.base import BaseCommand, CommandError

from tkindex.pipelines import SWEEP_PARAMETERS, pipeline_registry, run, sweep
from tkindex.reports import write_report, write_table
from tkindex.scenarios import load_config
from tkindex.utils import TkIndexError, ValidationError


def parse_sweep(text):
    """'key=v1,v2,...' -> (key, values); resolution and N take integers, eps takes reals."""
    key, sep, listed = text.partition("=")
    if not sep or not listed:
        raise ValidationError("Sweeps are written key=v1,v2,..., got {!r}".format(text))
    if key not in SWEEP_PARAMETERS:
        raise ValidationError(
            "Sweeps run over {}, not {!r}".format(list(SWEEP_PARAMETERS), key), key=key
        )
    cast = float if key == "eps" else int
    try:
        values = [cast(v) for v in listed.split(",")]
    except ValueError:
        raise ValidationError("Cannot read the values {!r}".format(listed), key=key)
    return key, values


class Command(BaseCommand):

    help = "Run a verification pipeline on a scenario config and write its JSON report. \
        Exits with 0 when every check passes, 1 on failed checks or computation failures \
        and 2 on invalid configs."

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand")
        for pipeline in pipeline_registry:
            subparser = subparsers.add_parser(pipeline.name, help=pipeline.help)
            subparser.add_argument(
                "--config", required=True, help="path to the scenario's JSON config"
            )
            subparser.add_argument(
                "--out",
                help="directory for <name>.report.json and <name>.table.csv \
                    (default: $REPORT_DIR, then the working directory)",
            )
            subparser.add_argument(
                "--sweep",
                help="key=v1,v2,... to repeat the pipeline over resolution, N or eps \
                    (at least three values)",
            )
            subparser.add_argument(
                "--workers", type=int, help="concurrent runs of a sweep"
            )

    def fail(self, error, returncode):
        self.stderr.write(json.dumps(error.as_dict(), sort_keys=True))
        raise CommandError(str(error), returncode=returncode)

    def handle(self, *args, **options):
        subcommand = options.get("subcommand")
        if subcommand is None:
            raise CommandError("Call the command with a subcommand. see --help", returncode=2)

        try:
            config = load_config(options["config"])
            sweep_spec = parse_sweep(options["sweep"]) if options.get("sweep") else None
            if sweep_spec is None:
                report = run(subcommand, config)
            else:
                parameter, values = sweep_spec
                report = sweep(
                    subcommand, config, parameter, values, workers=options.get("workers")
                )
        except ValidationError as e:
            self.fail(e, 2)
        except TkIndexError as e:
            self.fail(e, 1)

        self.stdout.write("Wrote {}".format(write_report(report, options.get("out"))))
        self.stdout.write("Wrote {}".format(write_table(report, options.get("out"))))

        if not report.passed:
            self.stdout.write(
                self.style.ERROR("FAILED {}: {}".format(subcommand, ", ".join(report.failures())))
            )
            raise CommandError(
                "{} on {} failed: {}".format(subcommand, config.name, report.failures()),
                returncode=1,
            )
        self.stdout.write(
            self.style.SUCCESS("{} on {} passed".format(subcommand, config.name))
        )
