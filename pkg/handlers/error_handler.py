import logging

from services.errors import DscmError, ModelConstructionError, ScenarioError, UnknownVariableError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

# Raised while reading the scenario file and the command-line overrides
USAGE_ERRORS = (ScenarioError, ModelConstructionError, UnknownVariableError)


def error_handler(error: BaseException) -> int:
    """
    Catch-all error handler so the CLI reports instead of crashing.

    Returns:
        2 for an invalid scenario or invalid flags, 1 for any other error
    """
    if isinstance(error, USAGE_ERRORS):
        logger.error(f"Invalid input: {error}")
        return EXIT_USAGE
    if isinstance(error, DscmError):
        logger.error(f"{type(error).__name__}: {error}")
        return EXIT_FAILED
    logger.error(f"Command failed: {type(error).__name__}: {error}", exc_info=error)
    return EXIT_FAILED
