import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bandgroup.hsi_core import (
    CubeFormatError,
    DownsampleOperator,
    HsiCube,
    SyntheticSpec,
    band_vector,
    downsample,
    gen_synthetic,
    load_cube,
    save_cube,
)

import oracles

f32 = st.floats(width=32, allow_nan=False, allow_infinity=False)


@st.composite
def cubes(draw, max_side=5, max_bands=5):
    w = draw(st.integers(1, max_side))
    h = draw(st.integers(1, max_side))
    n = draw(st.integers(2, max_bands))
    return HsiCube(draw(arrays(np.float32, (n, h, w), elements=f32)).astype(np.float64))


def test_cube_validation():
    with pytest.raises(ValueError, match="at least 2 bands"):
        HsiCube(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError, match="non-finite"):
        HsiCube(np.array([[[0.0, np.nan]], [[1.0, 2.0]]]))
    with pytest.raises(ValueError, match="3-D"):
        HsiCube(np.zeros((2, 2)))


def test_cube_is_immutable():
    cube = HsiCube(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        cube.data[0, 0, 0] = 1.0


def test_round_trip_bit_exact(tmp_path, rng):
    data = rng.standard_normal((3, 4, 4)).astype(np.float32).astype(np.float64)
    cube = HsiCube(data)
    save_cube(cube, tmp_path / "c.hsic")
    back = load_cube(tmp_path / "c.hsic")
    assert back == cube
    assert back.data.tobytes() == cube.data.tobytes()


def test_file_layout(tmp_path):
    cube = HsiCube(np.array([[[0.0]], [[1.0]]]))
    save_cube(cube, tmp_path / "c.hsic")
    raw = (tmp_path / "c.hsic").read_bytes()
    assert len(raw) == 16 + 8
    assert raw[:4] == b"HSIC"
    assert struct.unpack("<III", raw[4:16]) == (1, 1, 2)
    assert struct.unpack("<2f", raw[16:]) == (0.0, 1.0)


def test_band_sequential_row_major(tmp_path):
    # W=3, H=2: plane values enumerate y*W + x
    data = np.arange(12, dtype=float).reshape(2, 2, 3)
    save_cube(HsiCube(data), tmp_path / "c.hsic")
    raw = (tmp_path / "c.hsic").read_bytes()
    assert struct.unpack("<III", raw[4:16]) == (3, 2, 2)
    assert list(np.frombuffer(raw[16:], "<f4")) == list(range(12))


def test_save_load_save_identical(tmp_path, rng):
    cube = gen_synthetic(SyntheticSpec(5, 3, (2, 2), seed=4))
    save_cube(cube, tmp_path / "a.hsic")
    save_cube(load_cube(tmp_path / "a.hsic"), tmp_path / "b.hsic")
    assert (tmp_path / "a.hsic").read_bytes() == (tmp_path / "b.hsic").read_bytes()


def test_bad_magic(tmp_path):
    raw = b"XXXX" + struct.pack("<III", 1, 1, 2) + b"\0" * 8
    (tmp_path / "c.hsic").write_bytes(raw)
    with pytest.raises(CubeFormatError, match="HSIC"):
        load_cube(tmp_path / "c.hsic")


def test_truncated_payload(tmp_path):
    raw = b"HSIC" + struct.pack("<III", 2, 2, 5) + np.zeros(16, "<f4").tobytes()
    (tmp_path / "c.hsic").write_bytes(raw)
    with pytest.raises(CubeFormatError, match="truncated"):
        load_cube(tmp_path / "c.hsic")


def test_non_finite_reports_offset(tmp_path):
    payload = np.array([0.0, 1.0, np.inf, 2.0], "<f4")
    (tmp_path / "c.hsic").write_bytes(b"HSIC" + struct.pack("<III", 2, 1, 2) + payload.tobytes())
    with pytest.raises(CubeFormatError, match="offset 24"):
        load_cube(tmp_path / "c.hsic")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_cube(tmp_path / "nope.hsic")


def test_unwritable_directory_leaves_nothing(tmp_path):
    target = tmp_path / "missing_dir" / "c.hsic"
    with pytest.raises(OSError, match="missing_dir"):
        save_cube(HsiCube(np.zeros((2, 1, 1))), target)
    assert not target.parent.exists()


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_readonly_directory_leaves_nothing(tmp_path):
    d = tmp_path / "ro"
    d.mkdir()
    d.chmod(0o500)
    try:
        with pytest.raises(OSError):
            save_cube(HsiCube(np.zeros((2, 1, 1))), d / "c.hsic")
        assert list(d.iterdir()) == []
    finally:
        d.chmod(0o700)


def test_band_vector():
    cube = HsiCube(np.array([[[5.0, 7.0]], [[1.0, 2.0]]]))
    v = band_vector(cube, 0)
    assert v.band_index == 0
    assert list(v.values) == [5.0, 7.0]
    with pytest.raises(IndexError):
        band_vector(cube, 2)
    with pytest.raises(IndexError):
        band_vector(cube, -1)


def test_band_vector_survives_round_trip(tmp_path, rng):
    cube = HsiCube(rng.standard_normal((3, 2, 5)).astype(np.float32))
    save_cube(cube, tmp_path / "c.hsic")
    loaded = load_cube(tmp_path / "c.hsic")
    for i in range(3):
        assert np.array_equal(band_vector(loaded, i).values, band_vector(cube, i).values)


def test_downsample_constant():
    cube = HsiCube(np.full((2, 6, 6), 3.25))
    for f in (1, 2, 3, 6):
        out = downsample(cube, DownsampleOperator(f))
        assert out.data.shape == (2, 6 // f, 6 // f)
        assert np.all(out.data == 3.25)


def test_downsample_small():
    cube = HsiCube(np.array([[[1.0, 2.0], [3.0, 4.0]], [[0.0, 0.0], [0.0, 0.0]]]))
    out = downsample(cube, DownsampleOperator(2))
    assert out.data[0, 0, 0] == 2.5


def test_downsample_matches_block_oracle(rng):
    data = rng.standard_normal((3, 8, 8))
    out = downsample(HsiCube(data), DownsampleOperator(2))
    np.testing.assert_allclose(out.data, oracles.block_means(data, 2), rtol=0, atol=1e-12)


def test_downsample_rectangular_orientation():
    # W=4, H=2 with factor 2 -> 2x1 output; columns must average within their own block
    data = np.array([[[1, 1, 5, 5], [1, 1, 5, 5]], [[0, 0, 0, 0], [0, 0, 0, 0]]], dtype=float)
    out = downsample(HsiCube(data), DownsampleOperator(2))
    assert (out.width, out.height) == (2, 1)
    assert list(out.data[0, 0]) == [1.0, 5.0]


def test_downsample_divisibility():
    with pytest.raises(ValueError, match="divide"):
        downsample(HsiCube(np.zeros((2, 4, 6))), DownsampleOperator(4))
    with pytest.raises(ValueError):
        DownsampleOperator(0)


@settings(max_examples=50, deadline=None)
@given(cubes(max_side=6), st.integers(1, 3))
def test_downsample_preserves_band_mean(cube, f):
    # crop so f divides both sides
    h, w = cube.height - cube.height % f, cube.width - cube.width % f
    if h == 0 or w == 0:
        return
    cube = HsiCube(cube.data[:, :h, :w])
    out = downsample(cube, DownsampleOperator(f))
    a = cube.data.mean(axis=(1, 2))
    b = out.data.mean(axis=(1, 2))
    scale = np.abs(cube.data).max() + 1e-300
    assert np.all(np.abs(a - b) <= 1e-10 * np.maximum(np.abs(a), scale))


@settings(max_examples=50, deadline=None)
@given(cubes())
def test_round_trip_property(cube):
    import tempfile
    with tempfile.TemporaryDirectory() as d:
        save_cube(cube, os.path.join(d, "c.hsic"))
        assert load_cube(os.path.join(d, "c.hsic")) == cube


def test_gen_synthetic_deterministic():
    spec = SyntheticSpec(8, 8, (2, 3), 0.8, 0.1, seed=99)
    assert gen_synthetic(spec) == gen_synthetic(spec)
    assert gen_synthetic(spec) != gen_synthetic(SyntheticSpec(8, 8, (2, 3), 0.8, 0.1, seed=100))


def test_gen_synthetic_float32_representable():
    cube = gen_synthetic(SyntheticSpec(4, 4, (2, 2), seed=1))
    assert np.array_equal(cube.data.astype(np.float32).astype(np.float64), cube.data)


def test_gen_synthetic_intra_cluster_correlation():
    cube = gen_synthetic(SyntheticSpec(32, 32, (3, 3), 0.95, 0.01, seed=5))
    r = oracles.pearson_matrix(cube.data)
    for block in ((0, 1, 2), (3, 4, 5)):
        for i in block:
            for j in block:
                if i < j:
                    assert r[i, j] >= 0.85


def test_gen_synthetic_cross_cluster_correlation():
    cube = gen_synthetic(SyntheticSpec(32, 32, (2, 2), 0.95, 0.01, seed=6))
    r = oracles.pearson_matrix(cube.data)
    for i in (0, 1):
        for j in (2, 3):
            assert abs(r[i, j]) <= 0.3


def test_synthetic_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(4, 4, ())
    with pytest.raises(ValueError):
        SyntheticSpec(4, 4, (1,))
    with pytest.raises(ValueError):
        SyntheticSpec(4, 4, (2, 0))
    with pytest.raises(ValueError):
        SyntheticSpec(4, 4, (2, 2), intra_cluster_corr=0.0)
    with pytest.raises(ValueError):
        SyntheticSpec(4, 4, (2, 2), noise_sigma=-1)
