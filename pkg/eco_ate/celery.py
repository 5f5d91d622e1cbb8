import os

from celery import Celery

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "eco_ate.settings")

app = Celery("eco_ate")
app.config_from_object("django.conf:settings", namespace="CELERY")
app.autodiscover_tasks()

app.conf.timezone = "UTC"
