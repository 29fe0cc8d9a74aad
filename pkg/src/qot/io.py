"""File formats and job configuration.

Matrices travel as JSON records {"dim": n, "entries": [[re, im], ...]} with
row-major entries; complex numbers are always [re, im] pairs so that
write-then-read round-trips are bit-exact. Matrix fields are JSON arrays of
records. Time series are CSV.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .errors import ValidationError
from .linalg import as_density, as_hermitian
from .spatial import MatrixField


def matrix_to_record(m):
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"matrix record needs a square matrix, got {m.shape}")
    n = m.shape[0]
    entries = [[float(z.real), float(z.imag)] for z in m.reshape(-1)]
    return {"dim": n, "entries": entries}


def record_to_matrix(rec):
    if not isinstance(rec, dict) or set(rec.keys()) != {"dim", "entries"}:
        raise ValidationError(
            f"matrix record must have exactly the keys dim and entries, got "
            f"{sorted(rec.keys()) if isinstance(rec, dict) else type(rec).__name__}")
    n = rec["dim"]
    if not isinstance(n, int) or n < 1:
        raise ValidationError(f"record dim must be a positive integer, got {n!r}")
    entries = rec["entries"]
    if len(entries) != n * n:
        raise ValidationError(f"record has {len(entries)} entries, expected {n * n}")
    flat = np.empty(n * n, dtype=np.complex128)
    for i, pair in enumerate(entries):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ValidationError(f"entry {i} is not a [re, im] pair: {pair!r}")
        flat[i] = complex(float(pair[0]), float(pair[1]))
    if not np.all(np.isfinite(flat.view(np.float64))):
        raise ValidationError("record contains non-finite entries")
    return flat.reshape(n, n)


def write_matrix(path, m):
    with open(path, "w") as fh:
        json.dump(matrix_to_record(m), fh)
        fh.write("\n")


def read_matrix(path):
    with open(path) as fh:
        return record_to_matrix(json.load(fh))


def read_density(path):
    return as_density(read_matrix(path), name=str(path))


def read_hermitian(path):
    return as_hermitian(read_matrix(path), name=str(path))


def write_field(path, field):
    vals = field.values if isinstance(field, MatrixField) else np.asarray(field)
    with open(path, "w") as fh:
        json.dump([matrix_to_record(v) for v in vals], fh)
        fh.write("\n")


def read_field(path):
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise ValidationError(f"{path}: field file must be a non-empty JSON array")
    vals = [record_to_matrix(rec) for rec in data]
    dims = {v.shape[0] for v in vals}
    if len(dims) != 1:
        raise ValidationError(f"{path}: grid points have mixed dims {sorted(dims)}")
    return MatrixField(np.stack(vals))


def read_basis(path_or_name):
    """A named preset ("pauli", "gellmann:<n>") or a JSON array of matrix records."""
    from .lindblad import LindbladBasis, basis_from_name

    s = str(path_or_name)
    if s == "pauli" or s.startswith("gellmann:"):
        return basis_from_name(s)
    with open(s) as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise ValidationError(f"{s}: basis file must be a non-empty JSON array")
    return LindbladBasis(np.stack([record_to_matrix(rec) for rec in data]))


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


@dataclass
class JobConfig:
    """Validated bag of command parameters; unknown keys are rejected."""

    command: str
    kind: str = "anticomm"
    backend: str = "conic"
    steps: int = 16
    gamma: float = 1.0
    dt: float = 1e-3
    t_final: float = 1.0
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 50_000
    stride: int = 1
    basis: str = "pauli"
    marginal0: str | None = None
    marginal1: str | None = None
    state: str | None = None
    tangent1: str | None = None
    tangent2: str | None = None
    out: str | None = None
    only: str | None = None

    _POSITIVE = ("steps", "gamma", "dt", "t_final", "tol", "max_iter", "stride")

    def __post_init__(self):
        if self.command not in ("distance", "geodesic", "flow", "innerprod",
                                "spatial-distance", "spatial-flow", "check"):
            raise ValidationError(f"unknown command {self.command!r}")
        if self.kind not in ("anticomm", "log"):
            raise ValidationError(f"kind must be anticomm or log, got {self.kind!r}")
        if self.backend not in ("conic", "direct"):
            raise ValidationError(f"backend must be conic or direct, got {self.backend!r}")
        for name in self._POSITIVE:
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.seed < 0:
            raise ValidationError(f"seed must be nonnegative, got {self.seed}")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclass_fields(cls) if not f.name.startswith("_")}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)
