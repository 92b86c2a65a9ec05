import pydantic
import pytest

from app.models.kernel import ground_atom
from app.services.cache import cache_info, cached_acc, clear_acc_cache
from app.services.config import Settings, get_settings
from app.services.logics import DatalogLogic, HerbrandModelLogic

KB_A = frozenset({ground_atom("p", "a")})
KB_B = frozenset({ground_atom("p", "b")})


class TestAccMemo:
    def test_results_are_shared_across_equal_logics(self):
        first = cached_acc(DatalogLogic(), set(KB_A))
        assert cached_acc(DatalogLogic(), KB_A) is first
        info = cache_info()
        assert (info.hits, info.misses, info.currsize) == (1, 1, 1)

    def test_distinct_logics_do_not_collide(self):
        small = HerbrandModelLogic([("p", 1)], ["a"])
        large = HerbrandModelLogic([("p", 1)], ["a", "b"])
        assert len(cached_acc(small, frozenset())) == 2
        assert len(cached_acc(large, frozenset())) == 4

    def test_least_recently_used_entry_is_evicted(self, settings_env):
        settings_env(acc_cache_size=1)
        logic = DatalogLogic()
        cached_acc(logic, KB_A)
        cached_acc(logic, KB_B)
        cached_acc(logic, KB_A)
        info = cache_info()
        assert (info.hits, info.misses, info.maxsize, info.currsize) == (0, 3, 1, 1)

    def test_disabled_at_size_zero(self, settings_env):
        settings_env(acc_cache_size=0)
        logic = DatalogLogic()
        assert cached_acc(logic, KB_A) == cached_acc(logic, KB_A)
        info = cache_info()
        assert info.hits == 0 and info.currsize == 0

    def test_size_follows_settings(self, settings_env):
        settings_env(acc_cache_size=7)
        assert cache_info().maxsize == 7

    def test_clear(self):
        cached_acc(DatalogLogic(), KB_A)
        clear_acc_cache()
        assert cache_info().currsize == 0


class TestSettings:
    def test_defaults(self):
        settings = Settings(_env_file=None)
        assert settings.fast_path is True
        assert settings.max_unbounded_heads == 20
        assert settings.max_herbrand_base == 16
        assert settings.acc_cache_size == 4096
        assert settings.default_mode == "weak"
        assert settings.default_repair_size == 2
        assert settings.output_schema_version == "1"

    def test_environment_override(self, settings_env):
        settings = settings_env(fast_path="false", default_mode="strong", max_herbrand_base=4)
        assert settings.fast_path is False
        assert settings.default_mode == "strong"
        assert settings.max_herbrand_base == 4
        assert get_settings() is settings

    def test_rejects_bad_values(self, monkeypatch):
        monkeypatch.setenv("DEFAULT_MODE", "sometimes")
        with pytest.raises(pydantic.ValidationError):
            Settings(_env_file=None)
        monkeypatch.setenv("DEFAULT_MODE", "weak")
        monkeypatch.setenv("MAX_UNBOUNDED_HEADS", "-1")
        with pytest.raises(pydantic.ValidationError):
            Settings(_env_file=None)
