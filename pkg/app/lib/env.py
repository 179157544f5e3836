from dotenv import load_dotenv
import functools
import os

load_dotenv()

# caches whose values depend on the settings below, emptied on reload
_SETTINGS_CACHES = []


def _flag(value: str) -> bool:
    return value.strip().lower() in {"1", "true", "yes", "on"}


def settings_cache(maxsize=128):
    """functools.lru_cache that env_loader.reload() clears"""

    def wrap(func):
        cached = functools.lru_cache(maxsize=maxsize)(func)
        _SETTINGS_CACHES.append(cached)
        return cached

    return wrap


class EnvVars:
    """
    Singleton class for loading env_vars to use in the whole app \nUsage : env_loader.{env_name}
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(EnvVars, cls).__new__(cls)
            cls._instance._load_vars()
        return cls._instance

    def _load_vars(self):
        self.BCALC_ORDER = int(os.getenv("BCALC_ORDER", "6"))  # derivative certification depth
        self.BCALC_SAMPLES = int(os.getenv("BCALC_SAMPLES", "64"))
        self.BCALC_GRID = int(os.getenv("BCALC_GRID", "256"))
        self.BCALC_TRUNC = float(os.getenv("BCALC_TRUNC", "40"))
        self.BCALC_PRECISION = int(os.getenv("BCALC_PRECISION", "50"))  # mpmath digits
        self.BCALC_SEED = int(os.getenv("BCALC_SEED", "0"))
        self.BCALC_DEBUG = _flag(os.getenv("BCALC_DEBUG", "false"))
        self.BCALC_LOG_LEVEL = os.getenv("BCALC_LOG_LEVEL", "WARNING").upper()

    def reload(self):
        self._load_vars()
        for cached in _SETTINGS_CACHES:
            cached.cache_clear()


env_loader = EnvVars()
