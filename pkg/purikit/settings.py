import environ
from pathlib import Path

# Initialize environ
env = environ.Env()
environ.Env.read_env()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals; nothing is served.
SECRET_KEY = env('SECRET_KEY', default='purikit-local-only-key')

DEBUG = env.bool('DEBUG', default=True)

ALLOWED_HOSTS = env.list('ALLOWED_HOSTS', default=['localhost', '127.0.0.1'])

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'tensors',
    'sos',
    'eigen',
    'counterexamples',
    'bench',
]

# Database
DATABASES = {
    'default': env.db('DATABASE_URL', default=f'sqlite:///{BASE_DIR / "purikit.sqlite3"}')
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework settings (serializers and renderers only)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'COERCE_DECIMAL_TO_STRING': False,
}

# Logging
LOG_LEVEL = env('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
    'loggers': {
        'celery': {
            'handlers': ['console'],
            'level': env('CELERY_LOG_LEVEL', default='WARNING'),
            'propagate': False,
        },
    },
}

# Celery Configuration
# Without REDIS_URL every task runs eagerly inside the calling process.
REDIS_URL = env('REDIS_URL', default='')
CELERY_BROKER_URL = REDIS_URL or 'memory://'
CELERY_RESULT_BACKEND = REDIS_URL or 'cache+memory://'
CELERY_TASK_ALWAYS_EAGER = env.bool('CELERY_TASK_ALWAYS_EAGER', default=not REDIS_URL)
CELERY_TASK_EAGER_PROPAGATES = False
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE

# Numerical defaults
PURIKIT_DENSE_CAP = env.int('PURIKIT_DENSE_CAP', default=4096)  # largest d**N materialised densely
PURIKIT_RANK_TOL = env.float('PURIKIT_RANK_TOL', default=1e-9)
PURIKIT_DISTINCT_TOL = env.float('PURIKIT_DISTINCT_TOL', default=1e-10)
PURIKIT_SDP_TOL_GAP = env.float('PURIKIT_SDP_TOL_GAP', default=1e-7)
PURIKIT_SDP_FEASTOL = env.float('PURIKIT_SDP_FEASTOL', default=1e-7)
PURIKIT_SDP_MAX_ITER = env.int('PURIKIT_SDP_MAX_ITER', default=200)
PURIKIT_VERIFY_DENSE_MAX_M = env.int('PURIKIT_VERIFY_DENSE_MAX_M', default=4)
