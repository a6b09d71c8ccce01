"""
Django settings for permsel_project.

The project has no database and serves no HTTP traffic; Django provides the
management-command CLI, settings, templates and DRF serializers.
Every tunable below can be set from the environment or a `.env` file.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")

# --- Security / environment ---
SECRET_KEY = os.getenv("SECRET_KEY", "dev-secret")
DEBUG = os.getenv("DEBUG", "0") == "1"
ALLOWED_HOSTS = []

# --- Applications ---
INSTALLED_APPS = [
    "rest_framework",
    "selection",
]

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {"autoescape": False},
    },
]

# --- Database ---
# Results are written to files; nothing is persisted.
DATABASES = {}

# --- Internationalization ---
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

# --- DRF ---
# Only serializers are used, so authentication stays unconfigured.
REST_FRAMEWORK = {
    "UNAUTHENTICATED_USER": None,
}

# --- Permutation testing ---
PERMSEL_VERSION = "1.0.0"
PERMSEL_THREADS = int(os.getenv("PERMSEL_THREADS", "1"))
PERMSEL_PERMUTATIONS = int(os.getenv("PERMSEL_PERMUTATIONS", "4096"))
PERMSEL_SEED = int(os.getenv("PERMSEL_SEED", "20240101"))
PERMSEL_AICC_CONVENTION = os.getenv("PERMSEL_AICC_CONVENTION", "standard")
PERMSEL_ADD_ONE = os.getenv("PERMSEL_ADD_ONE", "0") == "1"
PERMSEL_FORECAST_SAMPLES = int(os.getenv("PERMSEL_FORECAST_SAMPLES", "10000"))
PERMSEL_KDE_BANDWIDTH = (
    float(os.environ["PERMSEL_KDE_BANDWIDTH"]) if os.getenv("PERMSEL_KDE_BANDWIDTH") else None
)
PERMSEL_INFLUENCE_THRESHOLD = (
    float(os.environ["PERMSEL_INFLUENCE_THRESHOLD"])
    if os.getenv("PERMSEL_INFLUENCE_THRESHOLD")
    else None
)

# --- Logging ---
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "selection": {
            "handlers": ["console"],
            "level": os.getenv("PERMSEL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
