# app/config.py
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict

_REPO_ROOT = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="GNDLINE_",
        # set this to the path of your .env when running outside the repo root.
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Sweep parallelism: 0 = one worker per CPU (GNDLINE_THREADS).
    threads: int = 0
    progress: bool = True

    # Linear solver
    solver_epsilon: float = 1e-30
    refinement_steps: int = 2
    # Refinement against a multiprecision residual: digits and step cap.
    extended_dps: int = 40
    extended_refinement_steps: int = 8

    # Default FRC / sweep grid (50 Hz .. 500 kHz, 200 log points).
    default_grid_start_hz: float = 50.0
    default_grid_stop_hz: float = 5e5
    default_grid_points: int = 200
    default_grid_spacing: str = "log"

    # Victim pipeline
    deviation_floor: float = 1e-12
    samples_per_cycle: int = 64
    endtoend_duration_s: float = 1e-3
    amplitude_grid_step_v: float = 20.0
    amplitude_grid_stop_v: float = 300.0

    # Aliasing probe: number of uniform ADC samples behind f_alias_empirical.
    alias_probe_samples: int = 10000
    # DC attack synthesis rate, as a multiple of the carrier frequency.
    dc_oversampling: float = 2.5

    # Guard
    noise_floor_v: float = 1e-6
    detection_threshold_factor: float = 10.0

    # Directory of reference JSON packs (canonical attacks, measured rows).
    reference_dir: str = str(_REPO_ROOT / "data" / "reference")

    log_level: str = "INFO"
    log_json: bool = True
    otel_enabled: bool = False
    otel_service_name: str = "gndline"
    otel_exporter_otlp_endpoint: str = "http://localhost:4317"


settings = Settings()
