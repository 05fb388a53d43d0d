import numpy as np
import pytest

from khe.errors import ConfigError, HierarchyMismatch, ShapeError
from khe.mesh import (
    GridField,
    build_hierarchy,
    coincident_index,
    field_to_csv,
    l1_norm,
    read_field,
    write_field,
)


@pytest.mark.parametrize(
    "m0,M,expect",
    [
        (0, 3, (1, 2, 4)),
        (2, 5, (7, 14, 28, 56, 112)),
        (4, 5, (31, 62, 124, 248, 496)),
    ],
)
def test_hierarchy_sizes(m0, M, expect):
    assert build_hierarchy(m0, M).ns == expect


def test_hierarchy_validation():
    with pytest.raises(ConfigError):
        build_hierarchy(-1, 3)
    with pytest.raises(ConfigError):
        build_hierarchy(2, 0)


def test_nesting_structure():
    h = build_hierarchy(3, 6)
    base = 2 ** (3 + 1) - 1
    assert base % 2 == 1
    for m in range(1, 6):
        assert h.ns[m] == 2 * h.ns[m - 1]
        # odd times power-of-two factorization
        n = h.ns[m]
        while n % 2 == 0:
            n //= 2
        assert n == base


def test_coincident_index():
    assert coincident_index(3, 1, 2) == 6
    assert coincident_index(0, 1, 5) == 0
    h = build_hierarchy(2, 3)
    j = np.arange(h.n(1))
    fine = coincident_index(j, 1, 3)
    assert np.array_equal(h.nodes(3)[fine], h.nodes(1))
    with pytest.raises(HierarchyMismatch):
        coincident_index(1, 3, 2)


def test_restrict_embed_lossless():
    h = build_hierarchy(2, 2)
    rng = np.random.default_rng(3)
    fine = rng.standard_normal((h.n(2), h.n(2)))
    idx = coincident_index(np.arange(h.n(1)), 1, 2)
    coarse = fine[np.ix_(idx, idx)]
    assert np.array_equal(fine[np.ix_(idx, idx)], coarse)


def test_l1_norm():
    n = 8
    assert l1_norm(np.ones((n, n)), n) == pytest.approx(1.0)
    assert l1_norm(np.full((n, n), -2.0), n) == pytest.approx(2.0)
    checker = np.indices((n, n)).sum(axis=0) % 2 * 2.0 - 1.0
    assert l1_norm(checker, n) == pytest.approx(1.0)
    with pytest.raises(ShapeError):
        l1_norm(np.ones(5), 8)


def test_field_shape_guard():
    f = GridField(level=1, n=4)
    with pytest.raises(ShapeError):
        f["rho"] = np.ones((3, 4))


def test_field_io_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    f = GridField(level=2, n=6)
    f["rho"] = rng.standard_normal((6, 6))
    f["m_x"] = rng.standard_normal((6, 6))
    path = tmp_path / "field.khe"
    write_field(path, f)
    g = read_field(path)
    assert g.level == 2 and g.n == 6 and g.names == ["rho", "m_x"]
    for name in g.names:
        assert np.array_equal(g[name], f[name])


def test_field_magic_check(tmp_path):
    path = tmp_path / "bad.khe"
    path.write_bytes(b"NOPE" + b"\0" * 16)
    with pytest.raises(ShapeError):
        read_field(path)


def test_csv_export(tmp_path):
    f = GridField(level=1, n=2)
    f["rho"] = np.array([[1.0, 2.0], [3.0, 4.0]])
    path = tmp_path / "rho.csv"
    field_to_csv(path, f, "rho")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 5
    assert lines[1].startswith("0,0,1")
    assert lines[2].startswith("0.5,0,2")
