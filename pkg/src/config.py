from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    app_name: str = "gibc-cq"

    log_dir: str = "logs"
    log_level: str = "INFO"
    log_file_max_bytes: int = 1_000_000
    log_backup_count: int = 5

    workers: int = 1
    assembly_chunk_size: int = 16
    cache_dir: str = ".cache/references"

    max_dense_dofs: int = 3000
    max_icosphere_level: int = 7

    model_config = SettingsConfigDict(
        env_file=".env", env_prefix="GIBC_", extra="ignore"
    )


settings = Settings()
