from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Sweep fan-out; FUJITA_LAB_THREADS overrides --threads
    threads: int | None = None
    # scipy.fft worker count per transform (None = single worker)
    fft_workers: int | None = None

    output_dir: str = "results"
    log_level: str = "INFO"

    # "Small data" target for amp=auto families, in the L^{p_c^s} norm
    small_data_norm: float = 0.01
    # |p - p_F| below this is the slow regime, excluded from pass/fail gating
    slow_regime_margin: float = 0.05

    cors_origins: str = "http://localhost:5173,http://localhost:3000"

    model_config = {"env_file": ".env", "env_prefix": "FUJITA_LAB_"}


settings = Settings()
