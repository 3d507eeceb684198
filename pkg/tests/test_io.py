import numpy as np
import pytest

from lfdepth import io


def test_pfm_header_and_row_order():
    a = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    raw = io.pfm_bytes(a)
    assert raw.startswith(b"Pf\n2 2\n-1\n")
    body = np.frombuffer(raw[len(b"Pf\n2 2\n-1\n"):], dtype="<f4")
    # bottom row first
    assert body.tolist() == [3.0, 4.0, 1.0, 2.0]


def test_pfm_roundtrip(tmp_path):
    a = np.random.default_rng(1).normal(size=(7, 5))
    io.write_pfm(tmp_path / "d.pfm", a)
    b = io.read_pfm(tmp_path / "d.pfm")
    assert b.shape == (7, 5)
    assert np.array_equal(b, a.astype(np.float32))


def test_pfm_bad_inputs(tmp_path):
    p = tmp_path / "x.pfm"
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(io.PFMError):
        io.read_pfm(p)
    p.write_bytes(b"Pf\n4 4\n-1\n\x00\x00")
    with pytest.raises(io.PFMError):
        io.read_pfm(p)


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    dest = tmp_path / "out.bin"
    with pytest.raises(RuntimeError):
        with io.atomic_path(dest) as tmp:
            tmp.write_bytes(b"partial")
            raise RuntimeError("boom")
    assert list(tmp_path.iterdir()) == []
    io.write_bytes_atomic(dest, b"ok")
    assert dest.read_bytes() == b"ok"
    assert [p.name for p in tmp_path.iterdir()] == ["out.bin"]


def test_to_uint8_range():
    u = io.to_uint8(np.array([[-1.0, 0.0, 1.0, np.nan]]), -1.0, 1.0)
    assert u.tolist() == [[0, 128, 255, 0]]


def test_atomic_write_uses_umask_mode(tmp_path):
    import os
    import stat
    old = os.umask(0o022)
    try:
        io.write_bytes_atomic(tmp_path / "f.bin", b"x")
    finally:
        os.umask(old)
    assert stat.S_IMODE((tmp_path / "f.bin").stat().st_mode) == 0o644
