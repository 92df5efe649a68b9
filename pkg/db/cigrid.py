"""
CIGRID v1 field files

One text header line

    CIGRID v1 n=<n> shape=<d1,...> h=<h> bbox=<lo1,hi1,...> kind=<scalar|vector|symmat>

followed by the values as row-major little-endian float64. Vector and symmat
fields store their components on a leading axis.
"""

import logging
import os
from dataclasses import dataclass

import numpy as np

from core.errors import FieldFormatError
from core.field import field_class, n_star

logger = logging.getLogger('corrugate.db.cigrid')

MAGIC = 'CIGRID v1'
KINDS = ('scalar', 'vector', 'symmat')
_DTYPE = np.dtype('<f8')
_MAX_HEADER = 4096


@dataclass(frozen=True)
class CigridHeader:
    n: int
    shape: tuple
    h: float
    bbox: tuple
    kind: str

    @property
    def components(self):
        return {'scalar': 1, 'vector': self.n, 'symmat': n_star(self.n)}[self.kind]

    @property
    def value_shape(self):
        lead = () if self.kind == 'scalar' else (self.components,)
        return lead + tuple(self.shape)

    @property
    def count(self):
        return int(np.prod(self.value_shape))

    def to_line(self):
        shape = ','.join(str(d) for d in self.shape)
        bbox = ','.join(repr(float(b)) for b in self.bbox)
        return f"{MAGIC} n={self.n} shape={shape} h={self.h!r} bbox={bbox} kind={self.kind}"

    @classmethod
    def parse(cls, line):
        """
        Parse a header line

        Raises:
            FieldFormatError: missing magic, missing or malformed fields
        """
        if not line.startswith(MAGIC + ' '):
            raise FieldFormatError(f"Not a CIGRID v1 header: {line[:40]!r}")
        fields = {}
        for token in line[len(MAGIC):].split():
            if '=' not in token:
                raise FieldFormatError(f"Malformed header token {token!r}")
            key, value = token.split('=', 1)
            fields[key] = value
        missing = [k for k in ('n', 'shape', 'h', 'bbox', 'kind') if k not in fields]
        if missing:
            raise FieldFormatError(f"Header lacks {', '.join(missing)}")
        try:
            n = int(fields['n'])
            shape = tuple(int(d) for d in fields['shape'].split(','))
            h = float(fields['h'])
            bbox = tuple(float(b) for b in fields['bbox'].split(','))
        except ValueError as e:
            raise FieldFormatError(f"Malformed header value: {e}")
        kind = fields['kind']
        if kind not in KINDS:
            raise FieldFormatError(f"Unknown field kind '{kind}'")
        if len(shape) != n or len(bbox) != 2 * n or not h > 0:
            raise FieldFormatError(f"Inconsistent header: n={n}, shape={shape}, bbox={bbox}, h={h}")
        return cls(n=n, shape=shape, h=h, bbox=bbox, kind=kind)

    def to_dict(self):
        return {'n': self.n, 'shape': list(self.shape), 'h': self.h, 'bbox': list(self.bbox),
                'kind': self.kind}


@dataclass(frozen=True)
class CigridData:
    header: CigridHeader
    values: np.ndarray

    def stats(self):
        v = self.values
        return {'min': float(np.min(v)), 'max': float(np.max(v)), 'mean': float(np.mean(v)),
                'sup': float(np.max(np.abs(v))), 'l2': float(np.sqrt(np.sum(v * v) * self.header.h ** self.header.n))}

    def to_field(self, grid):
        """
        Field on ``grid``; the header must describe the same nodes

        Raises:
            FieldFormatError: shape or spacing mismatch
        """
        if tuple(grid.shape) != tuple(self.header.shape) or grid.n != self.header.n:
            raise FieldFormatError(f"File grid {self.header.shape} does not match run grid {tuple(grid.shape)}")
        if abs(grid.h - self.header.h) > 1e-12 * grid.h:
            raise FieldFormatError(f"File spacing {self.header.h!r} does not match run spacing {grid.h!r}")
        return field_class(self.header.kind)(grid, self.values)


def header_for(f):
    grid = f.grid
    return CigridHeader(n=grid.n, shape=tuple(grid.shape), h=grid.h,
                        bbox=tuple(float(b) for b in grid.bbox.ravel()), kind=f.kind)


def write_field(path, f):
    """
    Write a field as CIGRID v1

    Args:
        path (str): Destination
        f: ScalarField, VectorField or SymMatrixField

    Raises:
        FieldFormatError: if the file cannot be written
    """
    header = header_for(f)
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'wb') as out:
            out.write((header.to_line() + '\n').encode('ascii'))
            out.write(np.ascontiguousarray(f.values, dtype=_DTYPE).tobytes(order='C'))
    except OSError as e:
        raise FieldFormatError(f"Cannot write {path}: {e}")
    logger.debug(f"Wrote {header.kind} field {header.shape} to {path}")


def _read_header_line(handle, path):
    line = handle.readline(_MAX_HEADER)
    if not line.endswith(b'\n'):
        raise FieldFormatError(f"{path}: header line missing or too long")
    try:
        return CigridHeader.parse(line.decode('ascii').rstrip('\n'))
    except UnicodeDecodeError:
        raise FieldFormatError(f"{path}: header is not ASCII")


def read_header(path):
    """Header of a CIGRID file"""
    try:
        with open(path, 'rb') as handle:
            return _read_header_line(handle, path)
    except OSError as e:
        raise FieldFormatError(f"Cannot read {path}: {e}")


def read_field(path):
    """
    Read a CIGRID file

    Returns:
        CigridData: Header and values shaped (components, *shape) or (*shape)

    Raises:
        FieldFormatError: unreadable file, bad header, wrong payload size or non-finite values
    """
    try:
        with open(path, 'rb') as handle:
            header = _read_header_line(handle, path)
            payload = handle.read()
    except OSError as e:
        raise FieldFormatError(f"Cannot read {path}: {e}")
    expected = header.count * _DTYPE.itemsize
    if len(payload) != expected:
        raise FieldFormatError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    values = np.frombuffer(payload, dtype=_DTYPE).reshape(header.value_shape).astype(float)
    if not np.all(np.isfinite(values)):
        raise FieldFormatError(f"{path}: non-finite values")
    return CigridData(header=header, values=values)
