"""
Logging context: the trial or delegation session a record belongs to.
"""

import logging
from contextvars import ContextVar

# Trial / session ID context variable
trial_id_var: ContextVar[str] = ContextVar("trial_id", default="")

LOG_FORMAT = "%(asctime)s level=%(levelname)s logger=%(name)s trial_id=%(trial_id)s msg=%(message)s"


class TrialIDFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        record.trial_id = trial_id_var.get("")
        return True


def configure_logging(level: str = "INFO") -> None:
    """Root logging setup shared by the command line and the worker."""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT, force=True)
    for handler in logging.getLogger().handlers:
        handler.addFilter(TrialIDFilter())
