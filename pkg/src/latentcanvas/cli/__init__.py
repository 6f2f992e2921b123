from .config import CACHE_ENV, CURRICULA, DEFAULTS, ConfigError, RunConfig
from .main import EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC, EXIT_OK, LockError, MissingArtifact, build_parser, main
