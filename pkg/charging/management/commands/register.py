"""
Management command to register an EV user or a charging station with the USP.

The USP database and the DID registry are created on first use.

Usage:
    python manage.py register --role user --biometric <text> --password <text>
    python manage.py register --role station --lai zone-1
    python manage.py register --role user --wallet state/alice.json --seed 7 ...
"""

from django.conf import settings

from charging.cli import Deployment, EvAuthCommand, StatePaths, clock_for, fork, random_source
from charging.constants import ATTR_DIGITAL_IDENTITY
from charging.exceptions import AlreadyRegisteredError
from charging.protocol import ChargingStation, UserDevice, load_wallet, save_cs_state, save_wallet


class Command(EvAuthCommand):
    help = 'Register an EV user device or a charging station with the utility service provider'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--role',
            choices=['user', 'station'],
            required=True,
            help='What to register',
        )
        parser.add_argument('--biometric', help='Biometric template of the user (opaque text)')
        parser.add_argument('--password', help='Password of the user')
        parser.add_argument(
            '--lai',
            default=None,
            help='Location area identifier of the station (default: EVAUTH_DEFAULT_LAI)',
        )
        parser.add_argument(
            '--shadow-set-size',
            type=int,
            default=None,
            help='Number of shadow identities for a user (default: EVAUTH_SHADOW_SET_SIZE)',
        )

    def run(self, **options):
        paths = StatePaths.from_options(options)
        deployment = Deployment(paths)
        seed = options['seed']
        rng = random_source(seed, f"register:{options['role']}:{deployment.registry.checksum}")
        clock = clock_for(seed)
        usp = deployment.usp(fork(rng, 'usp'), clock, create=True)

        if options['role'] == 'user':
            self._register_user(deployment, usp, paths, rng, clock, options)
        else:
            self._register_station(deployment, usp, paths, rng, options)

    def _register_user(self, deployment, usp, paths, rng, clock, options):
        biometric, password = options['biometric'], options['password']
        if not biometric or not password:
            raise self.usage_error('--biometric and --password are required for --role user')
        shadow_set_size = options['shadow_set_size'] or settings.EVAUTH_SHADOW_SET_SIZE
        if shadow_set_size < 1:
            raise self.usage_error('--shadow-set-size must be at least 1')
        if paths.wallet.exists() and load_wallet(paths.wallet).registered:
            raise AlreadyRegisteredError(f'{paths.wallet} already holds a registered wallet', role='user')

        device = UserDevice.provision(deployment.registry, fork(rng, 'user'), deployment.method)
        wallet = device.wallet
        digital_identity = deployment.gov.issue(
            wallet.did, wallet.public_key, {ATTR_DIGITAL_IDENTITY: 'true'}, clock.now(), rng=fork(rng, 'gov')
        )
        request = device.register(biometric.encode(), password.encode(), digital_identity, shadow_set_size)
        device.complete_registration(usp.handle_registration(request), biometric.encode(), password.encode())
        save_wallet(wallet, paths.wallet)

        self.stdout.write(self.style.SUCCESS(f'✓ Registered EV user {wallet.did}'))
        self.stdout.write(f'  wallet: {paths.wallet}')
        self.stdout.write(f'  shadow identities: {len(wallet.shadows)}')
        self.emit(outcome='success', role='user', did=wallet.did, shadows=len(wallet.shadows))

    def _register_station(self, deployment, usp, paths, rng, options):
        if paths.cs_state.exists():
            raise AlreadyRegisteredError(f'{paths.cs_state} already holds a registered station', role='cs')
        lai = options['lai'] or settings.EVAUTH_DEFAULT_LAI
        did = ChargingStation.provision_identity(deployment.registry, fork(rng, 'cs'), deployment.method)
        state = usp.register_station(did, lai.encode())
        save_cs_state(state, paths.cs_state)

        self.stdout.write(self.style.SUCCESS(f'✓ Registered charging station {state.did}'))
        self.stdout.write(f'  location: {lai}')
        self.stdout.write(f'  state: {paths.cs_state}')
        self.emit(outcome='success', role='station', did=state.did, lai=lai)
