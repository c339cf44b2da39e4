"""
Management command to run one authentication session between the registered
user, the registered charging station and the USP.

Usage:
    python manage.py authenticate --biometric <text> --password <text>
    python manage.py authenticate --biometric <text> --password <text> --lai zone-9
"""

from charging.cli import Deployment, EvAuthCommand, StatePaths, clock_for, fork, outcome_fields, random_source
from charging.protocol import ChargingStation, UserDevice, load_cs_state, load_wallet, save_wallet
from charging.simnet import Channel, authenticate


class Command(EvAuthCommand):
    help = 'Authenticate the registered EV user at the registered charging station'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--biometric', required=True, help='Biometric template of the user (opaque text)')
        parser.add_argument('--password', required=True, help='Password of the user')
        parser.add_argument(
            '--lai',
            default=None,
            help="Location the user claims (default: the station's location)",
        )

    def run(self, **options):
        paths = StatePaths.from_options(options)
        wallet = load_wallet(paths.wallet)
        cs_state = load_cs_state(paths.cs_state)
        deployment = Deployment(paths)
        seed = options['seed']
        rng = random_source(seed, f"authenticate:{wallet.pdid.hex()}:{deployment.registry.checksum}")
        usp = deployment.usp(fork(rng, 'usp'), clock_for(seed))

        device = UserDevice(wallet, deployment.registry, rng=fork(rng, 'user'))
        station = ChargingStation(cs_state, deployment.registry, rng=fork(rng, 'cs'))
        location = options['lai'].encode() if options['lai'] else cs_state.location
        result = authenticate(
            device,
            station,
            usp,
            Channel(),
            options['biometric'].encode(),
            options['password'].encode(),
            location,
        )
        # the wallet changes even on failure (pending session, consumed shadow identity)
        save_wallet(device.wallet, paths.wallet)

        via = 'shadow' if result.via_shadow else 'pdid'
        if result.succeeded:
            self.stdout.write(self.style.SUCCESS(f'✓ Session established with {cs_state.did} ({via})'))
        else:
            self.stdout.write(self.style.ERROR(f'✗ Session failed: {result.outcome}'))
        self.stdout.write(f'  messages exchanged: {result.messages}')
        self.emit(**outcome_fields(result.outcome), sk_match=result.keys_agree, via=via, messages=result.messages)
        if not result.succeeded:
            raise self.unexpected(f'authentication ended with {result.outcome}')
