import math

from contract_lens import __version__
from contract_lens.csvio import config_hash, fmt, metadata_line, read_csv, render, write_csv


def test_metadata_line():
    line = metadata_line(seed=4, config={"a": 1}, engine="c")
    assert line.startswith("# ")
    assert f"contract_lens={__version__}" in line
    assert "seed=4" in line and f"config_hash={config_hash({'a': 1})}" in line and "engine=c" in line


def test_config_hash_is_order_free():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_fmt():
    assert fmt(math.inf) == "inf"
    assert fmt(-math.inf) == "-inf"
    assert fmt(None) == ""
    assert fmt(True) == "true"
    assert float(fmt(0.1 + 0.2)) == 0.1 + 0.2


def test_round_trip(tmp_path):
    path = write_csv(tmp_path / "sub" / "t.csv", ["x", "y"], [[1, math.inf], [2, None]], "# meta")
    comments, rows = read_csv(path)
    assert comments == ["# meta"]
    assert rows == [{"x": "1", "y": "inf"}, {"x": "2", "y": ""}]


def test_render_layout():
    text = render(["a"], [[1]], "# m")
    assert text == "# m\na\n1\n"
