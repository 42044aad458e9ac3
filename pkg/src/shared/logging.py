# src/shared/logging.py
import logging
import sys
from typing import Optional

from .config import get_settings


def setup_logging(level: Optional[str] = None):
    settings = get_settings()

    # Reports own stdout; logs go to stderr
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.WARNING),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stderr),
        ],
        force=True,
    )

    logging.getLogger("sympy").setLevel(logging.WARNING)
    logging.getLogger("hypothesis").setLevel(logging.WARNING)
