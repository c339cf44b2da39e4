"""
Management command to count the cryptographic operations of an
authentication session and compare them with the reference deployment.

Usage:
    python manage.py bench
    python manage.py bench --iterations 20 --seed 3 --scale 1,10,100
"""

from charging.bench import run_bench
from charging.cli import EvAuthCommand


class Command(EvAuthCommand):
    help = 'Benchmark the per-role operation counts of the authentication phase'
    uses_state_files = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--iterations',
            type=int,
            default=100,
            help='Number of sessions to run (default: 100)',
        )
        parser.add_argument(
            '--scale',
            default='',
            help='Comma-separated EV populations for the scalability run, e.g. 1,10,100',
        )

    def run(self, **options):
        try:
            scales = [int(part) for part in options['scale'].split(',') if part.strip()]
        except ValueError:
            raise self.usage_error(f"--scale must be a comma-separated list of integers, got {options['scale']!r}") from None
        if options['iterations'] < 1 or any(n < 1 for n in scales):
            raise self.usage_error('--iterations and --scale values must be positive')

        seed = options['seed'] if options['seed'] is not None else 0
        report = run_bench(iterations=options['iterations'], seed=seed, scales=scales)
        self.stdout.write(report.render(), ending='')

        if report.within_tolerance:
            self.stdout.write(self.style.SUCCESS('✓ Operation counts match the reference deployment'))
        else:
            self.stdout.write(self.style.ERROR('✗ Operation counts differ from the reference deployment'))
        self.emit(outcome='success' if report.within_tolerance else 'benchmark-error', **report.result_fields())
        if not report.within_tolerance:
            raise self.unexpected('operation counts are outside tolerance')
