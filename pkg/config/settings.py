import os
from dotenv import load_dotenv
from pathlib import Path


load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Каталог запусков: runs/<имя>/config.yaml, metrics.csv, final.ckpt
RUNS_DIR = Path(os.getenv("MIKT_RUNS_DIR", BASE_DIR / "runs"))

LOG_LEVEL = os.getenv("MIKT_LOG_LEVEL", "INFO").upper()

# Число параллельных процессов для seed-ов в рецептах (joblib)
N_JOBS = int(os.getenv("MIKT_N_JOBS", "1"))

if os.getenv("MIKT_PROGRESS", "True") == "True":
    SHOW_PROGRESS = True
else:
    SHOW_PROGRESS = False


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "console": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
            "datefmt": "%H:%M:%S",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "console",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": LOG_LEVEL,
    },
}
