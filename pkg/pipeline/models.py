import hashlib
import json

from django.db import models


class StageRun(models.Model):
    STATUS_CHOICES = [
        ('SUCCEEDED', 'Succeeded'),
        ('FAILED', 'Failed'),
    ]

    stage = models.CharField(max_length=50)
    output_dir = models.CharField(max_length=1024)
    input_digest = models.CharField(max_length=64, blank=True)
    output_digest = models.CharField(max_length=64, blank=True)
    config = models.JSONField(default=dict)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='SUCCEEDED')
    message = models.TextField(blank=True)
    signature = models.CharField(max_length=64, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'stage_runs'
        ordering = ['-created_at', '-id']

    def __str__(self):
        return f"{self.stage} -> {self.output_dir} ({self.status})"

    def generate_signature(self):
        data = {
            'stage': self.stage,
            'input': self.input_digest,
            'output': self.output_digest,
            'status': self.status,
        }
        self.signature = hashlib.sha256(
            json.dumps(data, sort_keys=True).encode()
        ).hexdigest()

    def save(self, *args, **kwargs):
        self.generate_signature()
        super().save(*args, **kwargs)
