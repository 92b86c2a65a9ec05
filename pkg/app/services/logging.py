# Structured logging with structlog

import structlog
import logging
import sys
from app.services.config import get_settings


def setup_logging():
    """Setup structured logging; diagnostics go to stderr, results own stdout"""
    settings = get_settings()
    level = logging.DEBUG if settings.debug else getattr(logging, settings.log_level.upper(), logging.INFO)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer() if settings.log_json else structlog.dev.ConsoleRenderer()
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=level,
    )


class EngineLogger:
    """Logger for the reasoning engine with automatic component context"""

    def __init__(self, name: str):
        self.logger = structlog.get_logger(name)

    def grounding(self, operation: str, **kwargs):
        """Log grounding of rules and constraints"""
        return self.logger.bind(
            component="grounding",
            operation=operation,
            **kwargs
        )

    def search(self, operation: str, **kwargs):
        """Log equilibrium search"""
        return self.logger.bind(
            component="equilibria",
            operation=operation,
            **kwargs
        )

    def constraint_check(self, mode: str, **kwargs):
        """Log integrity-constraint checks"""
        return self.logger.bind(
            component="constraints",
            mode=mode,
            **kwargs
        )

    def repair(self, operation: str, **kwargs):
        """Log repair search"""
        return self.logger.bind(
            component="repair",
            operation=operation,
            **kwargs
        )

    def parse(self, source: str, **kwargs):
        """Log DSL parsing"""
        return self.logger.bind(
            component="frontend",
            source=source,
            **kwargs
        )

    def command(self, name: str, **kwargs):
        """Log CLI command dispatch"""
        return self.logger.bind(
            component="cli",
            command=name,
            **kwargs
        )

    def performance(self, operation: str, duration: float, **kwargs):
        """Log performance metrics"""
        return self.logger.bind(
            component="performance",
            operation=operation,
            duration_ms=round(duration * 1000, 2),
            **kwargs
        )


# Global logger instances
setup_logging()
engine_logger = EngineLogger("mcs_integrity")
