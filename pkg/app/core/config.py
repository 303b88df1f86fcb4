from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings"""

    # Database settings
    database_url: str = "sqlite:///./risk_monitor.db"

    # Scenario corpus settings
    corpus_dir: str = "scenarios"
    default_seed: int = 0
    bench_workers: int = 1  # 1 = run scenarios in-process

    # API settings
    api_title: str = "Perception Risk Monitor API"
    api_version: str = "1.0.0"
    api_description: str = "Task-aware risk estimation for perception failures with PAC guarantees"

    # Logging settings
    log_level: str = "INFO"  # DEBUG, INFO, WARNING, ERROR, CRITICAL
    log_dir: str = "logs"

    class Config:
        env_file = ".env"
        case_sensitive = False


settings = Settings()
