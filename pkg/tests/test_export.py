import numpy as np
import pytest

from rhythmlrt.errors import ExportError
from rhythmlrt.export import (
    config_hash,
    container_bytes,
    parse_container,
    read_container,
    write_container,
    write_container_csv,
)


class TestContainers:
    def test_f32_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        matrix = rng.random((17, 37)).astype(np.float32)
        path = write_container(tmp_path / "m.bin", matrix, {"representation": "lrt"})
        again, metadata = read_container(path)
        assert again.dtype == np.dtype("<f4")
        assert np.array_equal(again, matrix)
        assert metadata["representation"] == "lrt"
        assert metadata["rows"] == 17 and metadata["cols"] == 37

    def test_i32_round_trip(self, tmp_path):
        matrix = np.arange(24, dtype=np.int32).reshape(6, 4)
        path = write_container(tmp_path / "m.bin", matrix, {})
        again, _ = read_container(path)
        assert again.dtype == np.dtype("<i4")
        assert np.array_equal(again, matrix)

    def test_float64_is_downcast_once(self, tmp_path):
        matrix = np.array([[0.1, 0.2], [0.3, 0.4]])
        path = write_container(tmp_path / "m.bin", matrix, {})
        again, _ = read_container(path)
        assert np.array_equal(again, matrix.astype(np.float32))

    def test_vector_becomes_column(self, tmp_path):
        path = write_container(tmp_path / "v.bin", np.array([1, 2, 3], dtype=np.int32), {})
        again, metadata = read_container(path)
        assert again.shape == (3, 1)
        assert metadata["dtype"] == "i32"

    def test_header_layout(self):
        data = container_bytes(np.zeros((2, 3), dtype=np.float32))
        assert data[:4] == b"LRT1"
        assert data[4:6] == (1).to_bytes(2, "little")
        assert data[6] == 0  # f32 tag
        assert int.from_bytes(data[8:12], "little") == 2
        assert int.from_bytes(data[12:16], "little") == 3
        assert len(data) == 16 + 2 * 3 * 4

    def test_bad_magic(self):
        with pytest.raises(ExportError, match="magic"):
            parse_container(b"NOPE" + bytes(20))

    def test_payload_size_mismatch(self):
        data = container_bytes(np.zeros((2, 3), dtype=np.float32))
        with pytest.raises(ExportError, match="declares"):
            parse_container(data[:-4])

    def test_checksum_detects_corruption(self, tmp_path):
        path = write_container(tmp_path / "m.bin", np.ones((2, 2), dtype=np.float32), {})
        raw = bytearray(path.read_bytes())
        raw[-1] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(ExportError, match="checksum"):
            read_container(path)
        array, _ = read_container(path, verify=False)
        assert array.shape == (2, 2)

    def test_unsupported_dtype(self):
        with pytest.raises(ExportError, match="dtype"):
            container_bytes(np.zeros((2, 2), dtype=np.complex64))

    def test_csv_mirror(self, tmp_path):
        matrix = np.array([[1.5, 2.5]], dtype=np.float32)
        path = write_container_csv(tmp_path / "m.csv", matrix, {"representation": "x"})
        text = path.read_text()
        assert text.startswith("# ")
        assert "1.5,2.5" in text


class TestConfigHash:
    def test_stable_across_key_order(self):
        assert config_hash({"a": 1, "b": [2, 3]}) == config_hash({"b": [2, 3], "a": 1})

    def test_sensitive_to_values(self):
        assert config_hash({"a": 1}) != config_hash({"a": 2})
