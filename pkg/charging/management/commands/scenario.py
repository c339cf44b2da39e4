"""
Management command to run a scenario script.

Usage:
    python manage.py scenario scenarios/desync.txt
    python manage.py scenario scenarios/desync.txt --transcript out/desync.log
"""

from charging.cli import EvAuthCommand, outcome_fields
from charging.simnet import load_script, run_scenario

from .attack import write_transcript


class Command(EvAuthCommand):
    help = 'Run a scenario script against a fresh simulated deployment'
    uses_state_files = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('script', help='Path to the scenario script')
        parser.add_argument('--transcript', help='Write the full transcript to this file')

    def run(self, **options):
        scenario = load_script(options['script'])
        if options['seed'] is not None:
            scenario.seed = options['seed']
        transcript = run_scenario(scenario)

        if options['transcript']:
            write_transcript(options['transcript'], transcript.render())
        else:
            self.stdout.write(transcript.render(), ending='')

        for failure in transcript.failures:
            self.stdout.write(self.style.ERROR(f'✗ {failure}'))
        self.emit(**outcome_fields(transcript.outcome), scenario=scenario.name, passed=transcript.passed)
        if not transcript.passed:
            raise self.unexpected(f'{len(transcript.failures)} expectation(s) failed')
