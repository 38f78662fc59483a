# app/log.py
import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"

# ---------------------------
# Package logger: every module logs to "app.<module>" and propagates here
# ---------------------------
logger = logging.getLogger("app")
if not logger.handlers:
    # configure default handler so importers see logs even if logging not configured
    ch = logging.StreamHandler(sys.stderr)
    ch.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(ch)
    logger.setLevel(logging.INFO)


def get_logger(name: str) -> logging.Logger:
    if not name.startswith("app"):
        name = f"app.{name}"
    return logging.getLogger(name)


def set_verbosity(verbose: bool = False, quiet: bool = False) -> None:
    if verbose:
        logger.setLevel(logging.DEBUG)
    elif quiet:
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.INFO)
