"""Result files: CSV bodies, JSON sidecars and density-matrix input."""
import csv
import math
from pathlib import Path
from typing import Iterable, List, Mapping, Sequence

import numpy as np
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

from tensors.states import DensityMatrix
from .serializers import DensityMatrixSerializer


def clean(value):
    """Plain JSON types, with non-finite floats as None."""
    if isinstance(value, Mapping):
        return {str(key): clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(item) for item in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def format_cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ';'.join(format_cell(item) for item in value)
    return str(value)


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping]) -> Path:
    path = _prepare(path)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(column)) for column in columns])
    return path


def write_json(path, payload) -> Path:
    path = _prepare(path)
    path.write_bytes(JSONRenderer().render(clean(payload)) + b'\n')
    return path


def sidecar_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + '.json')


def read_density_matrix(path) -> DensityMatrix:
    """Parse {n_sites, local_dim, entries: [[re, im], ...]} into a validated DensityMatrix."""
    with Path(path).open('rb') as handle:
        data = JSONParser().parse(handle)
    serializer = DensityMatrixSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def write_density_matrix(path, rho: DensityMatrix) -> Path:
    return write_json(path, DensityMatrixSerializer(rho).data)


def read_csv(path) -> List[dict]:
    with Path(path).open(newline='') as handle:
        return list(csv.DictReader(handle))
