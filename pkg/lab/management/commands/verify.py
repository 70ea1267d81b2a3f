from django.core.management.base import CommandError

from lab.exceptions import ConfigError
from lab.management.base import EXIT_VERIFY_FAILED, LabCommand
from lab.serializers import SEED_MAX
from lab.verification import VERIFY_GROUPS, run_suite
from lab.writers import write_json


class Command(LabCommand):
    help = 'Run the invariant suite; prints one PASS/FAIL line per group and exits 1 on any failure'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--group', action='append', dest='groups',
                            help=f"Run only this group (repeatable): {', '.join(VERIFY_GROUPS)}")

    def load(self, options):
        if options.get('config'):
            raise ConfigError("verify takes no configuration")
        unknown = sorted(set(options.get('groups') or []) - set(VERIFY_GROUPS))
        if unknown:
            raise ConfigError(f"Unknown verification groups: {', '.join(unknown)}")
        seed = options.get('seed')
        if seed is not None and not 0 <= seed <= SEED_MAX:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {seed}")
        return {'groups': options.get('groups'), 'seed': seed}

    def run(self, config, out):
        results = run_suite(config['groups'], seed=config['seed'])
        for result in results:
            style = self.style.SUCCESS if result.passed else self.style.ERROR
            self.stdout.write(style(result.line()))
        write_json(out / 'verify.json', {'results': [result.as_dict() for result in results]})

        failed = [result.group for result in results if not result.passed]
        if failed:
            raise CommandError(f"Verification failed: {', '.join(failed)}", returncode=EXIT_VERIFY_FAILED)
        self.stdout.write(self.style.SUCCESS(f"All {len(results)} groups passed"))
