import os

import numpy as np
import pytest

from gapscope.errors import ParseError
from gapscope.gallery import gallery_names, get_entry
from gapscope.sdpa import read_sdpa, write_sdpa

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def _same_instance(a, b):
    assert a.n == b.n and a.m == b.m
    assert np.array_equal(a.C.packed, b.C.packed)
    for x, y in zip(a.A, b.A):
        assert np.array_equal(x.packed, y.packed)
    assert np.array_equal(a.b, b.b)


@pytest.mark.parametrize("name", ["ramana", "sd2", "control"])
def test_round_trip_exact(tmp_path, name):
    inst = get_entry(name).instance
    path = tmp_path / f"{name}.dat-s"
    write_sdpa(inst, path)
    back = read_sdpa(path)
    _same_instance(back, inst)


@pytest.mark.parametrize("name", ["ramana", "sd2", "control"])
def test_fixture_parses_to_gallery_instance(name):
    back = read_sdpa(os.path.join(FIXTURES, f"{name}.dat-s"))
    _same_instance(back, get_entry(name).instance)


@pytest.mark.parametrize("name", ["ramana", "sd2", "control"])
def test_writer_reproduces_fixture_bytes(tmp_path, name):
    path = tmp_path / f"{name}.dat-s"
    write_sdpa(get_entry(name).instance, path)
    with open(path, "rb") as fh:
        fresh = fh.read()
    with open(os.path.join(FIXTURES, f"{name}.dat-s"), "rb") as fh:
        committed = fh.read()
    assert fresh == committed


def test_entry_index_beyond_block_size_is_parse_error(tmp_path):
    path = tmp_path / "bad.dat-s"
    path.write_text("1\n1\n2\n1.0\n0 1 1 3 5.0\n")
    with pytest.raises(ParseError) as err:
        read_sdpa(path)
    assert err.value.line == 5


def test_lower_triangle_entry_rejected(tmp_path):
    path = tmp_path / "bad.dat-s"
    path.write_text("1\n1\n2\n1.0\n0 1 2 1 5.0\n")
    with pytest.raises(ParseError):
        read_sdpa(path)


def test_truncated_file_reports_line(tmp_path):
    path = tmp_path / "short.dat-s"
    path.write_text("2\n1\n3\n1.0\n")
    with pytest.raises(ParseError) as err:
        read_sdpa(path)
    assert "b[2]" in str(err.value)


def test_duplicate_entry_rejected(tmp_path):
    path = tmp_path / "dup.dat-s"
    path.write_text("1\n1\n2\n1.0\n1 1 1 1 1.0\n1 1 1 1 2.0\n")
    with pytest.raises(ParseError):
        read_sdpa(path)


def test_comment_lines_and_separators(tmp_path):
    path = tmp_path / "fancy.dat-s"
    path.write_text(
        '"a name\n'
        "* another comment\n"
        "1\n"
        "1\n"
        "{3}\n"
        "{1.0}\n"
        "0 1 1 1 2.0\n"
        "1 1 1 1 1.0\n")
    inst = read_sdpa(path)
    assert inst.name == "a name"
    assert inst.n == 3 and inst.m == 1
    assert inst.C_dense[0, 0] == 2.0


def test_diagonal_block_embedding(tmp_path):
    # one 2x2 psd block plus a -2 diagonal block embeds into a 4x4 matrix
    path = tmp_path / "blocks.dat-s"
    path.write_text(
        "1\n"
        "2\n"
        "2 -2\n"
        "1.0\n"
        "0 1 1 2 3.0\n"
        "0 2 1 1 5.0\n"
        "0 2 2 2 7.0\n"
        "1 2 2 2 1.0\n")
    inst = read_sdpa(path)
    assert inst.n == 4
    c = inst.C_dense
    assert c[0, 1] == 3.0 and c[2, 2] == 5.0 and c[3, 3] == 7.0
    with pytest.raises(ParseError):
        # off-diagonal entry inside a diagonal block
        bad = tmp_path / "badblocks.dat-s"
        bad.write_text("1\n2\n2 -2\n1.0\n0 2 1 2 5.0\n1 2 2 2 1.0\n")
        read_sdpa(bad)


def test_all_gallery_names_have_fixtures():
    for name in gallery_names():
        assert os.path.exists(os.path.join(FIXTURES, f"{name}.dat-s"))
