"""
Shared command surface: --config, --out, --seed, --threads and the mapping
of laboratory errors to exit codes.

    0  success
    1  verification failure
    2  configuration error
    3  runtime (numerical) error
"""
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from django.core.management.base import BaseCommand, CommandError
from threadpoolctl import threadpool_limits

from lab.exceptions import ConfigError, LabError
from lab.serializers import SEED_MAX, load_config, parse_config

logger = logging.getLogger(__name__)

EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


class LabCommand(BaseCommand):
    """
    Base class of the laboratory commands.

    Subclasses set `config_serializer` and implement `run(config, out)`.
    With `config_required = False` a missing --config means the empty
    document, i.e. all defaults.
    """

    config_serializer = None
    config_required = True

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON run configuration')
        parser.add_argument('--out', default='.', help='Output directory (created if missing)')
        parser.add_argument('--seed', type=int, help='Overrides the configuration seed')
        parser.add_argument('--threads', type=int, help='Worker threads for BLAS and FFT pools')

    def handle(self, *args, **options):
        try:
            with threadpool_limits(limits=self._threads(options.get('threads'))):
                config = self.load(options)
                out = Path(options.get('out') or '.')
                out.mkdir(parents=True, exist_ok=True)
                self.run(config, out)
        except ConfigError as e:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]}: configuration error: {e.message}")
            raise CommandError(e.message, returncode=EXIT_CONFIG_ERROR) from e
        except LabError as e:
            message = str(e)
            if 'step' in e.details:
                message = f"{message} at step {e.details['step']}"
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]}: {message}")
            raise CommandError(message, returncode=EXIT_RUNTIME_ERROR) from e

    def _threads(self, threads: Optional[int]) -> Optional[int]:
        if threads is not None and threads < 1:
            raise CommandError(f"--threads must be at least 1, got {threads}", returncode=EXIT_CONFIG_ERROR)
        return threads

    def load(self, options: Dict[str, Any]) -> Dict[str, Any]:
        """
        Raises:
            ConfigError: If the document is missing, malformed or invalid, or
                the seed override is not an unsigned 64-bit integer
        """
        if self.config_serializer is None:
            return {}
        path = options.get('config')
        if path:
            config = load_config(path, self.config_serializer)
        elif self.config_required:
            raise ConfigError("--config is required")
        else:
            config = parse_config('{}', self.config_serializer)

        seed = options.get('seed')
        if seed is not None:
            if not 0 <= seed <= SEED_MAX:
                raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {seed}")
            config = self.apply_seed(config, seed)
        return config

    def apply_seed(self, config: Dict[str, Any], seed: int) -> Dict[str, Any]:
        return dict(config, seed=seed)

    def run(self, config: Dict[str, Any], out: Path) -> None:
        raise NotImplementedError
