from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=64)),
                ('config', models.JSONField(default=dict)),
                ('results', models.JSONField(default=dict)),
                ('wall_time', models.FloatField(default=0.0)),
                ('version', models.CharField(max_length=32)),
                ('status', models.CharField(choices=[('ok', 'OK'), ('partial', 'Partial'), ('failed', 'Failed')], default='ok', max_length=16)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
