from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='StageRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('stage', models.CharField(max_length=50)),
                ('output_dir', models.CharField(max_length=1024)),
                ('input_digest', models.CharField(blank=True, max_length=64)),
                ('output_digest', models.CharField(blank=True, max_length=64)),
                ('config', models.JSONField(default=dict)),
                ('status', models.CharField(choices=[('SUCCEEDED', 'Succeeded'), ('FAILED', 'Failed')], default='SUCCEEDED', max_length=20)),
                ('message', models.TextField(blank=True)),
                ('signature', models.CharField(blank=True, max_length=64)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'db_table': 'stage_runs',
                'ordering': ['-created_at', '-id'],
            },
        ),
    ]
