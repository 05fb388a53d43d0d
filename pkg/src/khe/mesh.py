"""Embedded uniform periodic grid hierarchy and gridded field storage.

The domain is the unit torus [0,1)^2 at every level. Level m holds
N_m = 2^(m-1) (2^(m0+1) - 1) nodes per side at x_j = j/N_m, j = 0..N_m-1;
the periodic seam node j = N_m is not duplicated. Component arrays are
(N, N) float64 indexed [k, j] with k the y index and j the x index
(row-major, j fastest).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, HierarchyMismatch, ShapeError

__all__ = [
    "MeshHierarchy",
    "GridField",
    "build_hierarchy",
    "coincident_index",
    "l1_norm",
    "write_field",
    "read_field",
    "field_to_csv",
]

_MAGIC = b"KHE1"


@dataclass(frozen=True)
class MeshHierarchy:
    """Family of M nested uniform periodic grids."""

    m0: int
    M: int
    ns: tuple[int, ...]

    def n(self, level: int) -> int:
        """Nodes per side at 1-based level m."""
        if not 1 <= level <= self.M:
            raise HierarchyMismatch(f"level {level} outside 1..{self.M}")
        return self.ns[level - 1]

    def spacing(self, level: int) -> float:
        return 1.0 / self.n(level)

    def nodes(self, level: int) -> np.ndarray:
        """1-D node coordinates j/N_m, j = 0..N_m-1."""
        n = self.n(level)
        return np.arange(n) / n

    @property
    def finest(self) -> int:
        return self.M


def build_hierarchy(m0: int, M: int) -> MeshHierarchy:
    """Construct the hierarchy with N_m = 2^(m-1) (2^(m0+1) - 1)."""
    if m0 < 0:
        raise ConfigError(f"m0 must be >= 0, got {m0}")
    if M < 1:
        raise ConfigError(f"M must be >= 1, got {M}")
    base = 2 ** (m0 + 1) - 1
    return MeshHierarchy(m0=m0, M=M, ns=tuple(base * 2 ** (m - 1) for m in range(1, M + 1)))


def coincident_index(j, level: int, target_level: int):
    """Index on a finer level of the node that coincides with node j."""
    if target_level < level:
        raise HierarchyMismatch("target level must not be coarser")
    return j * 2 ** (target_level - level)


@dataclass
class GridField:
    """Named (N, N) node arrays on one level of a hierarchy."""

    level: int
    n: int
    components: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for name, arr in self.components.items():
            self._check_shape(name, arr)

    def _check_shape(self, name: str, arr: np.ndarray):
        if arr.shape != (self.n, self.n):
            raise ShapeError(f"component {name!r} has shape {arr.shape}, expected {(self.n, self.n)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.components[name]

    def __setitem__(self, name: str, arr: np.ndarray):
        arr = np.asarray(arr, dtype=np.float64)
        self._check_shape(name, arr)
        self.components[name] = arr

    def __contains__(self, name: str) -> bool:
        return name in self.components

    @property
    def names(self) -> list[str]:
        return list(self.components)

    def copy(self) -> "GridField":
        return GridField(self.level, self.n, {k: v.copy() for k, v in self.components.items()})


def l1_norm(values: np.ndarray, level_n: int) -> float:
    """Cell-volume weighted discrete L1 norm: sum |v| dx dy on the unit torus."""
    values = np.asarray(values)
    if values.size != level_n * level_n:
        raise ShapeError(f"expected {level_n * level_n} values, got {values.size}")
    return float(np.sum(np.abs(values)) / (level_n * level_n))


def write_field(path, fld: GridField):
    """Binary field file: magic, level, N, component count, names, float64 data.

    All integers are little-endian uint32; arrays are little-endian float64
    in row-major order (j fastest).
    """
    names = fld.names
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", fld.level, fld.n, len(names)))
        for name in names:
            raw = name.encode("ascii")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        for name in names:
            fh.write(np.ascontiguousarray(fld[name], dtype="<f8").tobytes())


def read_field(path) -> GridField:
    """Read a field written by write_field."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ShapeError(f"{path}: not a KHE1 field file")
        level, n, ncomp = struct.unpack("<III", fh.read(12))
        names = []
        for _ in range(ncomp):
            (ln,) = struct.unpack("<I", fh.read(4))
            names.append(fh.read(ln).decode("ascii"))
        fld = GridField(level=level, n=n)
        for name in names:
            data = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n)
            fld[name] = data.astype(np.float64)
    return fld


def field_to_csv(path, fld: GridField, component: str):
    """Sibling CSV export (x, y, value) for a single component."""
    arr = fld[component]
    xs = np.arange(fld.n) / fld.n
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for k in range(fld.n):
            y = xs[k]
            for j in range(fld.n):
                fh.write(f"{xs[j]:.17g},{y:.17g},{arr[k, j]:.17g}\n")
