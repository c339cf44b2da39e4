"""
Management command to run one of the built-in adversary scenarios.

Each scenario builds its own simulated deployment, so no state files are
read or written.

Usage:
    python manage.py attack --list
    python manage.py attack --type replay-m-a3
    python manage.py attack --type tamper --seed 42 --transcript out/tamper.log
"""

from pathlib import Path

from charging.cli import EvAuthCommand, outcome_fields
from charging.exceptions import StorageError
from charging.simnet import ATTACK_TYPES, BUILTIN_SCENARIOS, builtin_scenario, run_scenario


def write_transcript(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
    except OSError as exc:
        raise StorageError(f'cannot write transcript {path}: {exc}') from exc
    return path


class Command(EvAuthCommand):
    help = 'Run a built-in Dolev-Yao attack scenario and report how the protocol reacted'
    uses_state_files = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--type',
            dest='attack_type',
            choices=ATTACK_TYPES,
            help='Attack to run',
        )
        parser.add_argument(
            '--list',
            action='store_true',
            help='List the available attacks and exit',
        )
        parser.add_argument('--transcript', help='Write the full transcript to this file')

    def run(self, **options):
        if options['list']:
            for name in BUILTIN_SCENARIOS:
                self.stdout.write(name)
            return
        if not options['attack_type']:
            raise self.usage_error('--type is required (see --list)')

        scenario = builtin_scenario(options['attack_type'])
        if options['seed'] is not None:
            scenario.seed = options['seed']
        transcript = run_scenario(scenario)

        if options['transcript']:
            path = write_transcript(options['transcript'], transcript.render())
            self.stdout.write(f'  transcript: {path}')
        for line in transcript.events:
            self.stdout.write(f'  {line}')

        if transcript.passed:
            self.stdout.write(self.style.SUCCESS(f'✓ {scenario.name}: attack rejected as expected'))
        else:
            for failure in transcript.failures:
                self.stdout.write(self.style.ERROR(f'✗ {failure}'))
        self.emit(**outcome_fields(transcript.outcome), scenario=scenario.name, passed=transcript.passed)
        if not transcript.passed:
            raise self.unexpected(f'{scenario.name} did not end as expected')
