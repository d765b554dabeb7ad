# settings.py - environment driven settings and structlog configuration

import logging
import sys
from functools import lru_cache

import structlog
from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """Process-wide knobs read from MULTISLE_* environment variables or .env"""

    model_config = SettingsConfigDict(env_prefix="MULTISLE_", env_file=".env", extra="ignore")

    log_level: str = Field("INFO", pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")
    log_json: bool = False
    n_jobs: int = Field(1, ge=-1)
    output_dir: str = "."
    chart_accuracy_threshold: float = Field(1e-3, gt=0)
    retry_budget: int = Field(5, ge=1)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


settings = get_settings()

_configured = False


def configure_logging(level: str = None, json_logs: bool = None) -> None:
    """Route structlog through stdlib logging on stderr, once per process"""
    global _configured
    level = (level or settings.log_level).upper()
    json_logs = settings.log_json if json_logs is None else json_logs

    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=getattr(logging, level), force=True)

    renderer = structlog.processors.JSONRenderer() if json_logs else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    _configured = True


if not _configured:
    configure_logging()
