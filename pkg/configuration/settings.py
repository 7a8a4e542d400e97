from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="DHN_", env_file=".env", extra="ignore")

    output_dir: str = "output"
    log_level: str = "INFO"
    seed: int = 20240101
    max_parallel_runs: int = 2


@lru_cache
def get_settings() -> Settings:
    return Settings()
