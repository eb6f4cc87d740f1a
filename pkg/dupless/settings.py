"""
Django settings for the dupless project.

The project has no web surface: Django provides the command framework,
the settings layer, the stage ledger (sqlite) and the test runner.
Pipeline defaults live in ``DUPLESS`` below and can be overridden per run
by a key=value config file or command-line flags.
"""

from pathlib import Path
import os

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('DUPLESS_SECRET_KEY', 'dupless-local-only-key')
DEBUG = False
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'pipeline',
]

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'dupless_runs.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Pipeline defaults; every key can be overridden per run
DUPLESS = {
    'seed': 20210101,
    'output_dir': 'runs/default',
    'dataset_manifest': '',
    'external_embeddings': '',
    'external_tag': 'P-Ext',
    'workers': 1,

    # synthetic data
    'synth_enabled': True,
    'slices_per_class': 20,
    'slice_width': 512,
    'slice_height': 384,

    # tiling
    'patch_side': 128,

    # pretext task
    'pretext_fractions': '0.10,0.15',
    'pretext_source': 'train',
    'pretext_holdout': 0.2,

    # network
    'block_channels': '8,16,32,64',

    # pretext training
    'batch_size': 16,
    'learning_rate': 0.0001,
    'epochs': 60,
    'optimizer': 'adam',

    # SVMs
    'patch_kernel': 'rbf',
    'svm_c': 10.0,
    'svm_gamma': 0.001,
    'svm_tolerance': 1e-3,
    'svm_max_passes': 200,
    'slice_svm_c': 10.0,
    'slice_kernel': 'linear',
    'standardize': False,

    # evaluation
    'holdout_test_fraction': 0.25,
    'kfold': 4,

    # t-SNE
    'tsne_perplexity': 30.0,
    'tsne_iterations': 1000,
    'tsne_learning_rate': 200.0,
    'tsne_enabled': True,
    'tsne_svg': True,
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        name: {
            'handlers': ['console'],
            'level': os.environ.get('DUPLESS_LOG_LEVEL', 'INFO'),
            'propagate': False,
        }
        for name in ('imagecore', 'pretext', 'nnet', 'embeddings', 'classify',
                     'projection', 'evaluation', 'synthgen', 'pipeline')
    },
}
