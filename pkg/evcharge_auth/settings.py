# evcharge_auth/settings.py

from pathlib import Path
import os
import environ

# --------------------------------------------------------------------------------------
# Paths & env
# --------------------------------------------------------------------------------------
BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env(
    DEBUG=(bool, False),
    EVAUTH_SHADOW_SET_SIZE=(int, 10),
    LOG_LEVEL=(str, "INFO"),
)

# Load .env for local runs; otherwise rely on real environment variables
environ.Env.read_env(os.path.join(BASE_DIR, ".env"))

# --------------------------------------------------------------------------------------
# Core settings
# --------------------------------------------------------------------------------------
# Only the management commands use Django; nothing is signed with this key.
SECRET_KEY = env("DJANGO_SECRET_KEY", default="evcharge-auth-cli-only")
DEBUG = env("DEBUG")

ALLOWED_HOSTS = env.list("ALLOWED_HOSTS", default=["localhost", "127.0.0.1"])

# --------------------------------------------------------------------------------------
# Applications
# --------------------------------------------------------------------------------------
INSTALLED_APPS = [
    # Django core
    "django.contrib.contenttypes",
    "django.contrib.auth",

    # Your apps
    "charging",
]

# --------------------------------------------------------------------------------------
# Database (unused by the protocol; state lives in files under EVAUTH_STATE_DIR)
# --------------------------------------------------------------------------------------
DATABASES = {
    "default": env.db(
        "DATABASE_URL",
        default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}",
    )
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# --------------------------------------------------------------------------------------
# Internationalization
# --------------------------------------------------------------------------------------
LANGUAGE_CODE = "en-us"
TIME_ZONE = env("TIME_ZONE", default="UTC")
USE_I18N = False
USE_TZ = True

# --------------------------------------------------------------------------------------
# App-specific settings
# --------------------------------------------------------------------------------------
EVAUTH_STATE_DIR = Path(env("EVAUTH_STATE_DIR", default=str(BASE_DIR / "state")))
EVAUTH_SHADOW_SET_SIZE = env("EVAUTH_SHADOW_SET_SIZE")
EVAUTH_DID_METHOD = env("EVAUTH_DID_METHOD", default="evc")
EVAUTH_DEFAULT_LAI = env("EVAUTH_DEFAULT_LAI", default="zone-0")
# Seed of the built-in digital-identity issuer keypair
EVAUTH_GOV_ISSUER_SEED = env("EVAUTH_GOV_ISSUER_SEED", default="evcharge-auth/gov-issuer/v1")

# --------------------------------------------------------------------------------------
# Logging
# --------------------------------------------------------------------------------------
LOG_LEVEL = env("LOG_LEVEL")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "{levelname} {name}: {message}", "style": "{"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "charging": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": True},
    },
}

# --------------------------------------------------------------------------------------
# Sentry Integration (optional, environment-based)
# --------------------------------------------------------------------------------------
SENTRY_DSN = env("SENTRY_DSN", default=None)
SENTRY_ENVIRONMENT = env("SENTRY_ENVIRONMENT", default="production")

if SENTRY_DSN:
    import sentry_sdk
    from sentry_sdk.integrations.django import DjangoIntegration
    from sentry_sdk.integrations.logging import LoggingIntegration

    sentry_sdk.init(
        dsn=SENTRY_DSN,
        environment=SENTRY_ENVIRONMENT,
        integrations=[
            DjangoIntegration(),
            LoggingIntegration(
                level=None,
                event_level="ERROR",  # storage failures and other ERROR logs become events
            ),
        ],
        # Send PII (personally identifiable information)
        send_default_pii=False,
        release=env("SENTRY_RELEASE", default=None),
        before_send=lambda event, hint: event if not DEBUG else None,
    )
