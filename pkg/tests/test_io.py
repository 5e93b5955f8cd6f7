import json

import numpy as np
import pytest

from soupfall.exceptions import SoupParseError
from soupfall.geom import Rect, UnitDisk
from soupfall.io import csv_text, load_soup, save_soup
from soupfall.soup import ShapeMeasure, SoupSpec, sample_rw_loop_soup, sample_soup


def test_round_trip_large_circle_soup(tmp_path):
    spec = SoupSpec(1.0, ShapeMeasure.circle(), Rect.square(5), 0.02, 2.0)
    soup = sample_soup(spec, 4)
    assert len(soup) > 10_000
    p = tmp_path / "s.jsonl"
    save_soup(soup, p)
    back = load_soup(p)
    assert back == soup
    assert back.n_candidates == soup.n_candidates
    np.testing.assert_array_equal(back.curves.xy, soup.curves.xy)


@pytest.mark.parametrize("shape", [ShapeMeasure.stick(), ShapeMeasure("discrete_stick", 2.0, n=5)])
def test_round_trip_sticks_with_marks(tmp_path, shape):
    soup = sample_soup(SoupSpec(0.7, shape, UnitDisk(), 0.05), 9, marks=True)
    p = tmp_path / "s.jsonl"
    save_soup(soup, p)
    assert load_soup(p) == soup


def test_round_trip_lattice_loops(tmp_path):
    soup = sample_rw_loop_soup(Rect(0, 0, 10, 10), 1.0, 4, 0.5, seed=3)
    p = tmp_path / "s.jsonl"
    save_soup(soup, p)
    assert load_soup(p) == soup


def test_header_only_file_gives_empty_soup(tmp_path):
    spec = SoupSpec(1e-12, ShapeMeasure.circle(), UnitDisk(), 0.1)
    soup = sample_soup(spec, 0)
    p = tmp_path / "s.jsonl"
    save_soup(soup, p)
    assert len(p.read_text().splitlines()) == 1
    back = load_soup(p)
    assert len(back) == 0 and back.spec == spec


def test_truncated_file_is_an_error(tmp_path):
    soup = sample_soup(SoupSpec(0.5, ShapeMeasure.circle(), UnitDisk(), 0.05), 1)
    p = tmp_path / "s.jsonl"
    save_soup(soup, p)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(SoupParseError, match="curves"):
        load_soup(p)


def test_malformed_line_names_its_number(tmp_path):
    soup = sample_soup(SoupSpec(0.5, ShapeMeasure.circle(), UnitDisk(), 0.05), 1)
    p = tmp_path / "s.jsonl"
    save_soup(soup, p)
    lines = p.read_text().splitlines()
    lines[2] = '{"kind": "circle", "center": [0, 0]'
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(SoupParseError) as err:
        load_soup(p)
    assert err.value.line == 3
    assert str(err.value).startswith("line 3:")


def test_bad_header(tmp_path):
    p = tmp_path / "s.jsonl"
    p.write_text(json.dumps({"seed": 1}) + "\n")
    with pytest.raises(SoupParseError, match="line 1"):
        load_soup(p)


def test_csv_text_format():
    txt = csv_text(("a", "b", "c"), [(0.1, True, 3)])
    assert txt == "a,b,c\n0.1,true,3\n"
