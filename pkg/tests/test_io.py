import json
import os

import numpy as np
import pytest

from roughgg._util import atomic_write_text, dumps_json, format_float
from roughgg.dmfield import sample_field
from roughgg.domain import preset_set
from roughgg.errors import InputError
from roughgg.fields import random_facet_noise, slit_jump_field
from roughgg.io import (
    flux_field_bytes,
    pgm_bytes,
    read_flux_field,
    read_trace_csv,
    trace_csv_text,
    write_flux_field,
    write_trace_csv,
)


def test_float_formatting_17_digits():
    import math

    s = format_float(math.pi)
    assert len(s.replace(".", "").lstrip("0")) >= 16
    assert float(s) == math.pi


def test_dumps_json_round_trip():
    obj = {"a": 1.0 / 3.0, "b": [1, True, None, "x"], "c": {"d": -0.0}}
    text = dumps_json(obj)
    back = json.loads(text)
    assert back["a"] == 1.0 / 3.0
    assert back["b"] == [1, True, None, "x"]


def test_pgm_header_and_shape():
    levels = np.arange(12, dtype=np.uint8).reshape(3, 4)
    data = pgm_bytes(levels)
    assert data.startswith(b"P5\n3 4\n255\n")
    assert len(data) == len(b"P5\n3 4\n255\n") + 12


def test_flux_field_binary_round_trip(tmp_path, slit_square_32):
    F = random_facet_noise(slit_square_32, seed=9)
    path = os.path.join(tmp_path, "field.dmf")
    write_flux_field(path, F)
    G = read_flux_field(path, slit_square_32)
    for a in range(2):
        assert np.array_equal(F.vminus[a], G.vminus[a])
        assert np.array_equal(F.vplus[a], G.vplus[a])
    assert G.sup_bound == F.sup_bound


def test_flux_field_binary_deterministic(slit_square_32):
    F = sample_field(slit_jump_field(), slit_square_32, 1.0)
    assert flux_field_bytes(F) == flux_field_bytes(F)


def test_flux_field_grid_mismatch(tmp_path, slit_square_32, disk_64):
    F = sample_field(slit_jump_field(), slit_square_32, 1.0)
    path = os.path.join(tmp_path, "field.dmf")
    write_flux_field(path, F)
    with pytest.raises(InputError):
        read_flux_field(path, disk_64)


def test_flux_field_bad_magic(tmp_path, slit_square_32):
    path = os.path.join(tmp_path, "junk.dmf")
    with open(path, "wb") as handle:
        handle.write(b"NOPE" + b"\x00" * 64)
    with pytest.raises(InputError):
        read_flux_field(path, slit_square_32)


def test_trace_csv_round_trip(tmp_path, slit_square_32):
    from roughgg.dmfield import trace_measure

    F = sample_field(slit_jump_field(), slit_square_32, 1.0)
    tm = trace_measure(F)
    path = os.path.join(tmp_path, "tr.csv")
    write_trace_csv(path, tm.side_weights, slit_square_32.grid)
    back = read_trace_csv(path, slit_square_32.grid)
    area = slit_square_32.grid.facet_area
    assert set(back) == set(tm.side_weights)
    for key, g in back.items():
        assert g == pytest.approx(tm.side_weights[key] / area)


def test_trace_csv_malformed(tmp_path, square_32):
    path = os.path.join(tmp_path, "bad.csv")
    with open(path, "w") as handle:
        handle.write("axis,i0,i1,side,g\n0,1\n")
    with pytest.raises(InputError):
        read_trace_csv(path, square_32.grid)
    with open(path, "w") as handle:
        handle.write("nope\n")
    with pytest.raises(InputError):
        read_trace_csv(path, square_32.grid)
    with open(path, "w") as handle:
        handle.write("axis,i0,i1,side,g\n0,1,1,7,0.5\n")
    with pytest.raises(InputError):
        read_trace_csv(path, square_32.grid)


def test_atomic_write_leaves_no_partial(tmp_path):
    target = os.path.join(tmp_path, "out.json")
    atomic_write_text(target, "content")
    assert open(target).read() == "content"
    # writing into a missing directory fails without creating the target
    missing = os.path.join(tmp_path, "nodir", "out.json")
    with pytest.raises(FileNotFoundError):
        atomic_write_text(missing, "x")
    assert not os.path.exists(missing)
    leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".tmp-roughgg")]
    assert leftovers == []
