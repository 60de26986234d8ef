"""
Environment-driven settings for the scheduling toolkit
"""
import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv

# Load environment variables from a local .env file when present
load_dotenv()


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    # Allow scientific shorthand such as 1e10 for the hyperperiod cap
    return int(float(value))


def _float_env(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    return float(value)


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    database_url: str = "sqlite:///nds_results.db"
    hyperperiod_cap: int = 10**10
    schedule_timeout_s: float = 10.0
    max_table_packets: int = 2_000_000
    api_host: str = "0.0.0.0"
    api_port: int = 8000
    default_cycle_ns: int = 1_000_000

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from the process environment"""
        return cls(
            log_level=os.getenv("LOG_LEVEL", cls.log_level).upper(),
            database_url=os.getenv("DATABASE_URL", cls.database_url),
            hyperperiod_cap=_int_env("HYPERPERIOD_CAP", cls.hyperperiod_cap),
            schedule_timeout_s=_float_env("SCHEDULE_TIMEOUT_S", cls.schedule_timeout_s),
            max_table_packets=_int_env("MAX_TABLE_PACKETS", cls.max_table_packets),
            api_host=os.getenv("API_HOST", cls.api_host),
            api_port=_int_env("API_PORT", cls.api_port),
            default_cycle_ns=_int_env("DEFAULT_CYCLE_NS", cls.default_cycle_ns),
        )


@lru_cache()
def get_settings() -> Settings:
    """Process-wide settings, read once; call get_settings.cache_clear() to reload"""
    return Settings.from_env()
