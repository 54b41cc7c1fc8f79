"""
Django settings for the kfault_lab project.

The project hosts a single application, ``faulttrees``, whose experiments are
driven through management commands. There is no web surface; settings carry
configuration, logging and the numeric defaults used by the service layer.
"""

from pathlib import Path
import os

from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

SECRET_KEY = os.environ.get('SECRET_KEY', 'django-insecure-kfault-lab-local-only')

DEBUG = os.environ.get('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'faulttrees.apps.FaultTreesConfig',
]

# Only Django internals touch the database; experiments keep their state in files.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'kfault.sqlite3',
    }
}

USE_I18N = False
USE_TZ = True
TIME_ZONE = 'UTC'
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Analyses and gadget searches are deterministic, so cached entries never expire.
CACHES = {
    'default': {
        'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
        'LOCATION': 'kfault-analyses',
        'TIMEOUT': None,
        'OPTIONS': {
            'MAX_ENTRIES': 256,
        },
    }
}

# Span program / witness size
WITNESS_TOLERANCE = 1e-9
TRIVIAL_TOLERANCE = 1e-6

# Subformula complexity constants; None derives c_energy from c2 and c_prime
COMPLEXITY_C1 = 1.0
COMPLEXITY_C2 = 1.0
COMPLEXITY_C_PRIME = 2.0
COMPLEXITY_C_ENERGY = None

# Hard distribution
GADGET_MAX_LEAF_SLOTS = 20
HARD_DIST_HEIGHT_RATIO = 4

# NAND walk
WALK_ENERGY_LIMIT = 0.1
WALK_DEFAULT_ENERGY = 1e-6

# Benchmarks
BENCHMARK_JOBS = int(os.environ.get('KFAULT_JOBS', os.cpu_count() or 1))

KFAULT_VERSION = '1.0.0'

LOG_LEVEL = os.environ.get('KFAULT_LOG_LEVEL', 'DEBUG')
LOGS_DIR = BASE_DIR / 'logs'
os.makedirs(LOGS_DIR, exist_ok=True)

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '[{levelname}] {asctime} {name} pid={process:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '[{levelname}] {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        # Command output goes to stdout; the console only carries problems.
        'console': {
            'level': 'WARNING',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'file': {
            'level': 'WARNING',
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'kfault.log',
            'maxBytes': 5 * 1024 * 1024,
            'backupCount': 3,
            'formatter': 'verbose',
        },
        'error_file': {
            'level': 'ERROR',
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'errors.log',
            'maxBytes': 5 * 1024 * 1024,
            'backupCount': 3,
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'WARNING',
            'propagate': False,
        },
        'faulttrees': {
            'handlers': ['console', 'file', 'error_file'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
