"""
Django settings for config project.

Проект работает через management-команды (python manage.py <команда>);
веб-интерфейса нет. База SQLite хранит только журнал запусков.
"""

from pathlib import Path
import os

from dotenv import load_dotenv


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-freqsynth-local-only')

DEBUG = os.getenv('DJANGO_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'optics',
    'lsdnn',
]


# Database

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('FREQSYNTH_DB_PATH', str(BASE_DIR / 'freqsynth.sqlite3')),
    }
}


# Internationalization

LANGUAGE_CODE = 'ru-ru'
TIME_ZONE = 'Asia/Almaty'
USE_I18N = True
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Число потоков для пакетных вычислений (симуляция, PSD ансамбля)
FREQSYNTH_THREADS = max(1, int(os.getenv('FREQSYNTH_THREADS', os.cpu_count() or 1)))

LOG_LEVEL = os.getenv('FREQSYNTH_LOG_LEVEL', 'INFO').upper()

# Значения конфигурации запуска по умолчанию (перекрываются файлом --config и --set)
LSDNN_DEFAULTS = {
    'kind': 'DLI',
    'n': 64,
    'b': 7.0,
    'wavelength': 0.633e-6,
    'z': 50e-3,
    'pitch': None,  # None -> 12 мкм·sqrt(256/n) для QPR, 1.0 для DLI
    'resample': 'fourier',
    'p': None,  # None -> 1.5 для DLI, 1.0 для QPR
    'phi_max': 3.141592653589793,
    'count': 200,
    'source': '',
    'epochs': 20,
    'batch_size': 10,
    'lr': 1e-3,
    'seed': 0,
    'widths': '16,32,64',
    'res_blocks': 2,
    'kernel_size': 3,
    'width_multiplier': 1,
    'wiener_eps': 1e-6,
    'dot_spacing': 5,
    'dot_count': 2,
    'out': 'runs/default',
}

LSDNN_DEFAULT_P = {
    'DLI': 1.5,
    'QPR': 1.0,
}


# Logging
(BASE_DIR / 'logs').mkdir(exist_ok=True)

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'file': {
            'level': 'INFO',
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'logs' / 'app.log',
            'formatter': 'simple',
        },
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['file', 'console'],
            'level': 'WARNING',
            'propagate': True,
        },
        'optics': {
            'handlers': ['file', 'console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'lsdnn': {
            'handlers': ['file', 'console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
