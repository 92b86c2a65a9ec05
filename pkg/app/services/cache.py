"""Process-wide memo of acceptability results.

Entries are keyed by ``(logic.cache_key(), kb)``, so two logic objects with the
same configuration share results. The bound comes from ``acc_cache_size``.
"""

from functools import lru_cache
from typing import Callable

from app.services.config import get_settings


class _Keyed:
    """Hashes a logic by its cache key while keeping the object for evaluation."""

    __slots__ = ("logic", "key")

    def __init__(self, logic):
        self.logic = logic
        self.key = logic.cache_key()

    def __hash__(self) -> int:
        return hash(self.key)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _Keyed) and self.key == other.key


def _acc(keyed: _Keyed, kb: frozenset):
    return keyed.logic.acc(kb)


@lru_cache(maxsize=None)
def acc_memo(size: int) -> Callable:
    """The bounded memo used while ``acc_cache_size`` is ``size``; 0 disables it."""
    return lru_cache(maxsize=size)(_acc)


def cached_acc(logic, kb):
    """``logic.acc(kb)`` through the shared memo"""
    return acc_memo(get_settings().acc_cache_size)(_Keyed(logic), frozenset(kb))


def cache_info():
    return acc_memo(get_settings().acc_cache_size).cache_info()


def clear_acc_cache() -> None:
    acc_memo.cache_clear()
