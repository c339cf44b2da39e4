"""
Management command for private-key backup, loss and recovery.

Usage:
    python manage.py recover --action backup --shares 3/5 --passphrase <text> --out-dir shares/
    python manage.py recover --action delete-key
    python manage.py recover --action restore --passphrase <text> shares/*.share
"""

from charging.cli import EvAuthCommand, StatePaths, random_source
from charging.constants import SHARE_KDF_ITERATIONS
from charging.exceptions import PreconditionError
from charging.identity import DidRegistry
from charging.protocol import UserDevice, load_wallet, read_share_files, save_wallet, write_share_files
from charging.sharing import ShareParams


class Command(EvAuthCommand):
    help = "Back up the user's private key to custodian shares, delete it, or restore it from k shares"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--action',
            choices=['backup', 'restore', 'delete-key'],
            required=True,
            help='What to do with the private key',
        )
        parser.add_argument('--shares', default='3/5', help='Threshold and custodian count as k/n (default: 3/5)')
        parser.add_argument('--passphrase', help='Passphrase protecting the share files')
        parser.add_argument('--out-dir', default='shares', help='Directory for new share files (default: shares)')
        parser.add_argument(
            '--kdf-iterations',
            type=int,
            default=SHARE_KDF_ITERATIONS,
            help=f'PBKDF2 iterations for share encryption (default: {SHARE_KDF_ITERATIONS})',
        )
        parser.add_argument('share_files', nargs='*', help='Share files to restore from')

    def run(self, **options):
        paths = StatePaths.from_options(options)
        wallet = load_wallet(paths.wallet)
        registry = DidRegistry(paths.registry)
        rng = random_source(options['seed'], f"recover:{wallet.did}:{options['action']}")
        device = UserDevice(wallet, registry, rng=rng)

        action = options['action']
        if action in ('backup', 'restore') and not options['passphrase']:
            raise self.usage_error(f'--passphrase is required for --action {action}')

        if action == 'backup':
            try:
                params = ShareParams.parse(options['shares'])
            except PreconditionError as exc:
                raise self.usage_error(str(exc)) from exc
            blobs = device.backup_key(params, options['passphrase'], iterations=options['kdf_iterations'])
            written = write_share_files(blobs, options['out_dir'], stem=wallet.did.identifier[:16])
            self.stdout.write(self.style.SUCCESS(f'✓ Private key split into {params.n} shares, any {params.k} recover it'))
            for path in written:
                self.stdout.write(f'  {path}')
            self.emit(outcome='success', action=action, shares=len(written), threshold=params.k)
            return

        if action == 'delete-key':
            device.delete_private_key()
            save_wallet(wallet, paths.wallet)
            self.stdout.write(self.style.WARNING(f'Private key of {wallet.did} deleted from {paths.wallet}'))
            self.emit(outcome='success', action=action)
            return

        if not options['share_files']:
            raise self.usage_error('--action restore needs share files')
        device.restore_key(read_share_files(options['share_files']), options['passphrase'])
        save_wallet(wallet, paths.wallet)
        self.stdout.write(self.style.SUCCESS(f'✓ Private key of {wallet.did} restored'))
        self.emit(outcome='success', action=action, shares=len(options['share_files']))
