"""Plain-text particle and result files.

Input lines hold ``x y z re(psi) im(psi)``; blank lines and anything after
``#`` are ignored. Output has one ``re im`` pair per line in input order.
"""

from importlib import resources
from pathlib import Path

import numpy as np


class ParticleFileError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


def read_particles(path):
    """(points (N, 3), weights (N,) complex) from a particle file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParticleFileError(path, 0, f"cannot read file ({e.strerror})") from e
    pts, w = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ParticleFileError(path, lineno, f"expected 5 columns, found {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise ParticleFileError(path, lineno, "non-numeric value") from None
        if not np.all(np.isfinite(vals)):
            raise ParticleFileError(path, lineno, "non-finite value")
        pts.append(vals[:3])
        w.append(complex(vals[3], vals[4]))
    if not pts:
        raise ParticleFileError(path, 0, "no particles")
    return np.array(pts, dtype=float), np.array(w, dtype=complex)


def write_particles(path, points, weights, header=None):
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for p, q in zip(points, weights):
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g} {q.real:.17g} {q.imag:.17g}\n")


def write_values(path, values):
    with open(path, "w") as fh:
        for v in values:
            fh.write(f"{v.real:.17g} {v.imag:.17g}\n")


def read_values(path):
    return np.loadtxt(path, ndmin=2) @ np.array([1.0, 1j])


def sample_path():
    """Bundled 1000-particle cloud in the unit cube."""
    return resources.files("fourierfmm") / "data" / "sample_1000.txt"
