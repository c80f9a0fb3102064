"""Environment variable utilities."""

import logging
import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


def load_env(env_file: Optional[str] = None) -> Dict[str, Optional[str]]:
    """Load environment variables from .env file.

    Args:
        env_file: Path to the .env file

    Returns:
        Dictionary of environment variables
    """
    if not env_file:
        for location in (".env", "../.env"):
            if Path(location).exists():
                env_file = location
                break

    if env_file and Path(env_file).exists():
        logger.debug(f"Loading environment variables from {env_file}")
        load_dotenv(env_file)

    return {
        "LGRLN_LOG_LEVEL": os.environ.get("LGRLN_LOG_LEVEL", "INFO"),
        "LGRLN_CONFIG": os.environ.get("LGRLN_CONFIG", "config/config.json"),
        "LGRLN_SEED": os.environ.get("LGRLN_SEED"),
    }
