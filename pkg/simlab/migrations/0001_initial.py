import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SimulationRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("created", models.DateTimeField(auto_now_add=True)),
                ("modified", models.DateTimeField(auto_now=True)),
                ("scenario", models.JSONField()),
                ("estimation", models.JSONField(blank=True, default=dict)),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("pending", "Pending"),
                            ("running", "Running"),
                            ("completed", "Completed"),
                            ("failed", "Failed"),
                        ],
                        default="pending",
                        max_length=20,
                    ),
                ),
                ("build_id", models.CharField(blank=True, default="", max_length=100)),
                ("replications", models.PositiveIntegerField(default=0)),
                ("failure_count", models.PositiveIntegerField(default=0)),
                ("started_at", models.DateTimeField(blank=True, null=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
                ("error", models.TextField(blank=True, default="")),
            ],
            options={
                "db_table": "simlab_simulationrun",
                "ordering": ["-created"],
            },
        ),
        migrations.CreateModel(
            name="ReplicationResult",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("created", models.DateTimeField(auto_now_add=True)),
                ("modified", models.DateTimeField(auto_now=True)),
                ("estimator", models.CharField(max_length=50)),
                ("epsilon", models.FloatField()),
                ("seed", models.BigIntegerField()),
                ("replicate", models.PositiveIntegerField()),
                ("estimate", models.FloatField(blank=True, null=True)),
                ("se", models.FloatField(blank=True, null=True)),
                ("ci_lo", models.FloatField(blank=True, null=True)),
                ("ci_hi", models.FloatField(blank=True, null=True)),
                ("covered", models.BooleanField(blank=True, null=True)),
                (
                    "sources_used",
                    models.CharField(blank=True, default="", max_length=255),
                ),
                ("failed", models.BooleanField(default=False)),
                ("error", models.TextField(blank=True, default="")),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="results",
                        to="simlab.simulationrun",
                    ),
                ),
            ],
            options={
                "db_table": "simlab_replicationresult",
                "ordering": ["run", "replicate", "estimator"],
                "unique_together": {("run", "estimator", "epsilon", "replicate")},
            },
        ),
    ]
