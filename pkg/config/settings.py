"""
Django settings for the twisted Dirac laboratory.

The project has no web surface and no models: Django provides the settings
layer, the app registry and the management-command entry points
(`python manage.py spectrum|flow|index|verify`).

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-dirac-lab-local-only')

DEBUG = os.getenv('DJANGO_DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'target_geometry',
    'spin_domain',
    'twisted_dirac',
    'transport_constraint',
    'flow',
    'index_theory',
    'lab',
]

# The laboratory never touches a database; sqlite keeps Django's checks quiet.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / os.getenv('DB_NAME', 'db.sqlite3'),
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# ============================================================================
# CACHE (per-domain spectral operators)
# ============================================================================

CACHES = {
    'default': {
        'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
        'LOCATION': 'dirac-lab',
        'TIMEOUT': None,
        'OPTIONS': {
            'MAX_ENTRIES': int(os.getenv('LAB_CACHE_MAX_ENTRIES', 64)),
        },
    }
}


# ============================================================================
# REST FRAMEWORK SETTINGS (config validation and JSON rendering only)
# ============================================================================

REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PARSER_CLASSES': [
        'rest_framework.parsers.JSONParser',
    ],
    'COERCE_DECIMAL_TO_STRING': False,
    'STRICT_JSON': True,
}


# ============================================================================
# TARGET GEOMETRY
# ============================================================================

# Residual allowed between a stored target point and its projection
TARGET_POINT_TOL = float(os.getenv('TARGET_POINT_TOL', 1e-10))

# Cut-locus margin on d^N against the injectivity radius
TARGET_CUT_LOCUS_MARGIN = float(os.getenv('TARGET_CUT_LOCUS_MARGIN', 1e-9))


# ============================================================================
# TWISTED DIRAC NUMERICS
# ============================================================================

# Dense Hermitian eigensolve up to this matrix dimension, shift-invert above it
DIRAC_DENSE_EIGEN_LIMIT = int(os.getenv('DIRAC_DENSE_EIGEN_LIMIT', 8192))
DIRAC_EIGEN_RESIDUAL_TOL = float(os.getenv('DIRAC_EIGEN_RESIDUAL_TOL', 1e-8))
DIRAC_ITERATIVE_SHIFT = float(os.getenv('DIRAC_ITERATIVE_SHIFT', 1e-3))
DIRAC_ITERATIVE_MAXITER = int(os.getenv('DIRAC_ITERATIVE_MAXITER', 10000))

# Eigenvalue clustering: |λ_i - λ_j| <= max(ATOL, RTOL * |λ_i|)
DIRAC_CLUSTER_RTOL = float(os.getenv('DIRAC_CLUSTER_RTOL', 1e-8))
DIRAC_CLUSTER_ATOL = float(os.getenv('DIRAC_CLUSTER_ATOL', 1e-10))

# Relative gap separating a near-zero cluster from the rest of the spectrum
DIRAC_GAP_RATIO = float(os.getenv('DIRAC_GAP_RATIO', 10.0))

# Eigenvalues below this are rotated into chirality eigenvectors
DIRAC_KERNEL_TOL = float(os.getenv('DIRAC_KERNEL_TOL', 1e-9))

# Resolvent contour quadrature
DIRAC_CONTOUR_NODES = int(os.getenv('DIRAC_CONTOUR_NODES', 16))
DIRAC_CONTOUR_MIN_DISTANCE = float(os.getenv('DIRAC_CONTOUR_MIN_DISTANCE', 1e-6))

# Largest admissible normal component of an input twisted spinor
DIRAC_TANGENCY_TOL = float(os.getenv('DIRAC_TANGENCY_TOL', 1e-6))


# ============================================================================
# VERIFICATION SUITE
# ============================================================================

# Multiplies every tolerance used by `manage.py verify`
VERIFY_TOLERANCE_SCALE = float(os.getenv('VERIFY_TOLERANCE_SCALE', 1.0))
VERIFY_SEED = int(os.getenv('VERIFY_SEED', 20240601))


# ============================================================================
# LOGGING CONFIGURATION
# ============================================================================

LAB_LOG_LEVEL = os.getenv('LAB_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {process:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': LAB_LOG_LEVEL,
            'propagate': False,
        }
        for app in (
            'target_geometry',
            'spin_domain',
            'twisted_dirac',
            'transport_constraint',
            'flow',
            'index_theory',
            'lab',
        )
    },
}
