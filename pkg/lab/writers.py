"""
Output files: CSV tables, JSON summaries, JSON-lines traces and binary field
dumps with a JSON header sidecar.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from rest_framework.renderers import JSONRenderer

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
FIELD_DTYPE = '<f8'


def clean(value):
    """JSON-safe copy: numpy scalars and arrays as Python values, non-finite floats as None."""
    if isinstance(value, dict):
        return {str(key): clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(item) for item in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def render_json(data: Any, indent: Optional[int] = None) -> bytes:
    context = {'indent': indent} if indent else None
    return JSONRenderer().render(clean(data), renderer_context=context)


def write_json(path: Path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.write_bytes(render_json(data, indent=2) + b'\n')
    logger.info(f"Wrote {path}")
    return path


def write_jsonl(path: Path, rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.write_bytes(b''.join(render_json(row) + b'\n' for row in rows))
    logger.info(f"Wrote {path}")
    return path


def write_csv(path: Path, rows: List[Dict[str, Any]], columns: Sequence[str]) -> Path:
    path = Path(path)
    pd.DataFrame(rows, columns=list(columns)).to_csv(path, float_format=FLOAT_FORMAT, index=False)
    logger.info(f"Wrote {path} ({len(rows)} rows)")
    return path


def write_field(directory: Path, name: str, array: np.ndarray, axes: Sequence[str],
                description: str = '') -> Path:
    """
    Dump an array as row-major little-endian float64 to `<name>.bin` with a
    header `<name>.json`. Complex arrays get a trailing (real, imag) axis.
    """
    directory = Path(directory)
    array = np.asarray(array)
    is_complex = np.iscomplexobj(array)
    axes = list(axes)
    if is_complex:
        array = np.stack([array.real, array.imag], axis=-1)
        axes.append('re_im')
    if len(axes) != array.ndim:
        raise ValueError(f"Field {name} has {array.ndim} axes, {len(axes)} names given")

    stored = np.ascontiguousarray(array, dtype=FIELD_DTYPE)
    binary = directory / f'{name}.bin'
    stored.tofile(binary)
    header = {
        'field': name,
        'description': description,
        'file': binary.name,
        'shape': list(stored.shape),
        'axes': axes,
        'dtype': 'float64',
        'endianness': 'little',
        'layout': 'row-major',
        'complex': is_complex,
    }
    write_json(directory / f'{name}.json', header)
    return binary


def read_field(header_path: Path) -> np.ndarray:
    """Inverse of write_field, from the header sidecar."""
    header_path = Path(header_path)
    header = json.loads(header_path.read_text(encoding='utf-8'))
    array = np.fromfile(header_path.parent / header['file'], dtype=FIELD_DTYPE).reshape(header['shape'])
    if header['complex']:
        array = array[..., 0] + 1j * array[..., 1]
    return array
