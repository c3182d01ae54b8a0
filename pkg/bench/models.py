from django.db import models


class RunRecord(models.Model):
    """One invocation of an experiment command with its full configuration."""
    STATUS_CHOICES = [
        ('ok', 'OK'),
        ('partial', 'Partial'),
        ('failed', 'Failed'),
    ]

    command = models.CharField(max_length=64)
    config = models.JSONField(default=dict)
    results = models.JSONField(default=dict)
    wall_time = models.FloatField(default=0.0)
    version = models.CharField(max_length=32)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default='ok')
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command} run {self.id} ({self.status})"
