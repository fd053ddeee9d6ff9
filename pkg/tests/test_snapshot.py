import numpy as np
import pytest

from micropolar.grid import WaveGrid, random_field
from micropolar.snapshot import MAGIC, read_snapshot, write_snapshot


@pytest.fixture
def grid():
    return WaveGrid((8, 6, 4), (1.0, 2.0, 3.0))


class TestSnapshot:
    def test_scalar_round_trip(self, grid, tmp_path):
        f = random_field(grid, 11, "snap")
        back, eps = read_snapshot(write_snapshot(tmp_path / "a.mpsf", f, eps=0.25))
        assert eps == 0.25
        assert back.grid == grid
        assert np.array_equal(back.coeffs, f.coeffs)

    def test_vector_round_trip(self, grid, tmp_path):
        u = random_field(grid, 11, "vsnap", vector=True)
        back, _ = read_snapshot(write_snapshot(tmp_path / "u.mpsf", u))
        assert back.coeffs.shape == u.coeffs.shape
        assert np.array_equal(back.coeffs, u.coeffs)

    def test_layout_is_ascending_mode_order(self, tmp_path):
        g = WaveGrid((4, 4, 4))
        f = random_field(g, 1, "zero") * 0.0
        f.coeffs[1, 0, 0] = 2.0 + 1.0j  # mode (1, 0, 0)
        f.coeffs[3, 0, 0] = 2.0 - 1.0j  # its conjugate at (-1, 0, 0)
        path = write_snapshot(tmp_path / "m.mpsf", f)
        raw = path.read_bytes()
        assert raw[:4] == MAGIC
        data = np.frombuffer(raw[52:], dtype="<c16").reshape(4, 4, 4)
        # index = n + N/2 along every axis
        assert data[3, 2, 2] == 2.0 + 1.0j
        assert data[1, 2, 2] == 2.0 - 1.0j
        assert np.count_nonzero(data) == 2

    def test_file_size(self, grid, tmp_path):
        path = write_snapshot(tmp_path / "s.mpsf", random_field(grid, 1, "sz"))
        assert path.stat().st_size == 52 + 8 * 6 * 4 * 16

    def test_truncated(self, grid, tmp_path):
        path = write_snapshot(tmp_path / "t.mpsf", random_field(grid, 1, "t"))
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(ValueError, match="whole number"):
            read_snapshot(path)
        path.write_bytes(b"MPSF")
        with pytest.raises(ValueError, match="header"):
            read_snapshot(path)

    def test_bad_magic_and_version(self, grid, tmp_path):
        path = write_snapshot(tmp_path / "b.mpsf", random_field(grid, 1, "b"))
        raw = bytearray(path.read_bytes())
        path.write_bytes(b"XXXX" + bytes(raw[4:]))
        with pytest.raises(ValueError, match="magic"):
            read_snapshot(path)
        raw[4] = 9
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="version"):
            read_snapshot(path)
