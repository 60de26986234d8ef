"""
Utility functions for the deterministic scheduling toolkit
"""
import csv
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

from src.utils.exceptions import ArithmeticOverflowError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Largest value allowed for intermediate products (signed 128-bit)
INT128_MAX = 2**127 - 1


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging the same way for every entry point"""
    if level is None:
        level = os.getenv("LOG_LEVEL", "INFO")
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT)


def checked(value: int, what: str = "value") -> int:
    """Return value unchanged or raise when it leaves the signed 128-bit range"""
    if value > INT128_MAX or value < -INT128_MAX - 1:
        logger.error(f"Arithmetic overflow while computing {what}")
        raise ArithmeticOverflowError(f"{what} exceeds the 128-bit range")
    return value


def checked_mul(a: int, b: int, what: str = "product") -> int:
    return checked(a * b, what)


def checked_add(a: int, b: int, what: str = "sum") -> int:
    return checked(a + b, what)


def nonneg_mod(x: int, m: int) -> int:
    """Modulo that is always in [0, m) for positive m, whatever the sign of x"""
    return ((x % m) + m) % m


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_json(path: str, payload: Any) -> None:
    directory = os.path.dirname(path)
    if directory:
        ensure_dir(directory)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=False)
        handle.write("\n")


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write rows to a CSV file and return how many were written"""
    directory = os.path.dirname(path)
    if directory:
        ensure_dir(directory)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            count += 1
    return count


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))
