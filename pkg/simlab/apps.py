from django.apps import AppConfig


class SimlabConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "simlab"
    verbose_name = "Monte Carlo simulation lab"
