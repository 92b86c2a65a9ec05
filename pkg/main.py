import logging
import sys

from dotenv import load_dotenv

# Load environment variables before settings are first read
load_dotenv()

from app.api.cli import cli  # noqa: E402
from app.services.config import get_settings  # noqa: E402

logger = logging.getLogger(__name__)


def main() -> int:
    settings = get_settings()
    logger.debug("starting %s v%s", settings.app_name, settings.app_version)
    return cli()


if __name__ == "__main__":
    sys.exit(main())
