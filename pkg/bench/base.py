import logging
import time

import numpy as np
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from rest_framework import serializers
from rest_framework.exceptions import ParseError, ValidationError as SerializerValidationError

import purikit
from purikit.exceptions import NumericalFailure
from .exports import clean, sidecar_path, write_csv, write_json
from .models import RunRecord
from .runners import RUNNERS
from .serializers import SCHEMA_VERSION

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def comma_list(value: str):
    return [item.strip() for item in value.split(',') if item.strip()]


class ExperimentCommand(BaseCommand):
    """
    Shared flow of every experiment command: validate the configuration, run,
    write CSV (or JSON) with a JSON sidecar, and store a RunRecord.

    Exit codes: 2 for invalid input, 3 for numerical failure, 4 for I/O errors.
    """
    command_name = None
    config_serializer = None

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--tol', type=float, default=None)
        parser.add_argument('--out', required=True, help='Output path of the result table')
        parser.add_argument('--jobs', type=int, default=1, help='Largest number of concurrent tasks')
        parser.add_argument('--format', choices=['csv', 'json'], default='csv')
        self.add_experiment_arguments(parser)

    def add_experiment_arguments(self, parser):
        pass

    def build_config(self, options) -> dict:
        config = {}
        for name, field in self.config_serializer().fields.items():
            value = options.get(name)
            if value is None:
                continue
            if isinstance(field, serializers.ListField) and isinstance(value, str):
                value = comma_list(value)
            config[name] = value
        return config

    def handle(self, *args, **options):
        serializer = self.config_serializer(data=self.build_config(options))
        if not serializer.is_valid():
            raise CommandError(f"Invalid configuration: {serializer.errors}", returncode=EXIT_VALIDATION)
        config = {'command': self.command_name, **clean(dict(serializer.validated_data))}

        started = time.perf_counter()
        try:
            outcome = RUNNERS[self.command_name](config)
        except (ValidationError, SerializerValidationError, ParseError) as e:
            raise CommandError(f"Invalid input: {e}", returncode=EXIT_VALIDATION)
        except (NumericalFailure, np.linalg.LinAlgError) as e:
            raise CommandError(f"Numerical failure: {e}", returncode=EXIT_NUMERICAL)
        except OSError as e:
            raise CommandError(f"I/O error: {e}", returncode=EXIT_IO)
        wall_time = time.perf_counter() - started

        payload = {
            'schema_version': SCHEMA_VERSION,
            'command': self.command_name,
            'config': config,
            'status': outcome.status,
            'summary': outcome.summary,
            'wall_time': wall_time,
            'version': purikit.__version__,
        }
        try:
            if config['format'] == 'csv':
                write_csv(config['out'], outcome.columns, outcome.rows)
                write_json(sidecar_path(config['out']), payload)
            else:
                write_json(config['out'], {**payload, 'columns': outcome.columns, 'rows': outcome.rows})
        except OSError as e:
            raise CommandError(f"I/O error: {e}", returncode=EXIT_IO)

        try:
            record = RunRecord.objects.create(
                command=self.command_name,
                config=config,
                results=clean({'summary': outcome.summary, 'rows': len(outcome.rows)}),
                wall_time=wall_time,
                version=purikit.__version__,
                status=outcome.status,
            )
            logger.info(f"Stored {record}")
        except DatabaseError as e:
            logger.warning(f"Run record not stored: {e}")

        self.stdout.write(
            f"{self.command_name}: {len(outcome.rows)} rows, status {outcome.status}, "
            f"{wall_time:.2f}s -> {config['out']}"
        )
