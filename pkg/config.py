from pathlib import Path
from dynaconf import Dynaconf

BASE_DIR = Path(__file__).parent

settings = Dynaconf(
    envvar_prefix="FDODE",
    settings_files=[str(BASE_DIR / "settings.toml")],
    environments=True,
    load_dotenv=True,
    env_switcher="FDODE_ENV",
    merge_enabled=True,
)


def get_seed() -> int:
    return int(settings.seed)


def ensure_directories() -> None:
    directories = []
    if settings.logging.log_to_file:
        directories.append(BASE_DIR / settings.logging.log_dir)
    for directory in directories:
        directory.mkdir(parents=True, exist_ok=True)
