import io as stdio
import json

import numpy as np
import pytest

from theta_forge import io, lattice as lat, prolim
from theta_forge.errors import LatticeFormatError


def test_parse_gram_and_basis():
    l = io.parse_lattice('{"rank": 2, "gram": [[1, -0.5], [-0.5, 1]], "label": "A2"}')
    assert l.label == "A2"
    assert l.rank == 2
    b = io.parse_lattice('{"basis": [[1, 0.5], [0, 0.8660254037844386]]}')
    np.testing.assert_allclose(b.gram, [[1, 0.5], [0.5, 1]], atol=1e-12)


def test_lattice_file_round_trip(tmp_path):
    path = tmp_path / "l.json"
    original = lat.make_lattice([[0.1, 1 / 3], [1 / 3, 2.0]], label="x")
    io.write_lattice(original, str(path))
    again = io.read_lattice(str(path))
    np.testing.assert_array_equal(again.gram, original.gram)
    assert again.label == "x"


@pytest.mark.parametrize(
    "text, line",
    [
        ('{"gram": [[1, 0], [0, 1]}', 1),
        ('{\n  "rank": 3,\n  "gram": [[1]]\n}', 2),
        ('{\n  "gram": [[1, 2], [2, 1]]\n}', 2),
        ('{\n  "gram": [[1, "a"]]\n}', 2),
        ('{"label": "nothing"}', 1),
    ],
)
def test_format_errors_carry_position(text, line):
    with pytest.raises(LatticeFormatError) as e:
        io.parse_lattice(text, "bad.json")
    assert e.value.path == "bad.json"
    assert e.value.line == line
    assert str(e.value).startswith("bad.json:")


def test_system_round_trip():
    system = prolim.diagonal_system([1.0, 4.0])
    text = io.dumps(io.system_to_dict(system))
    again = io.parse_system(text)
    assert again.depth == 2
    np.testing.assert_array_equal(again.levels[2].gram, system.levels[2].gram)


def test_system_errors():
    with pytest.raises(LatticeFormatError):
        io.parse_system('{"levels": []}')
    bad = {"levels": [{"gram": [[1]]}, {"gram": [[1, 0], [0, 1]]}]}
    with pytest.raises(LatticeFormatError):
        io.parse_system(json.dumps(bad))
    bad["levels"][1]["map"] = [[2, 0]]
    with pytest.raises(LatticeFormatError):
        io.parse_system(json.dumps(bad))


def test_dumps_handles_numpy():
    out = json.loads(io.dumps({"a": np.float64(1.5), "b": np.arange(2), "c": np.bool_(True)}))
    assert out == {"a": 1.5, "b": [0, 1], "c": True}


def test_csv_output():
    buf = stdio.StringIO()
    io.write_csv(buf, ["t", "value", "ok"], [[1, 0.1, True], [2, float("inf"), False]])
    assert buf.getvalue().splitlines() == ["t,value,ok", "1,0.10000000000000001,true", "2,inf,false"]


SYSTEM_TEXT = """{
  "levels": [
    {"gram": []},
    {"gram": [[1.0]], "map": []},
    {"gram": %s,
     "map": %s}
  ]
}"""


def test_system_errors_point_at_failing_level():
    with pytest.raises(LatticeFormatError) as e:
        io.parse_system(SYSTEM_TEXT % ('[[1, 2], [2, 1]]', '[[1, 0]]'), "s.json")
    assert (e.value.line, e.value.column) == (5, 6)
    with pytest.raises(LatticeFormatError) as e:
        io.parse_system(SYSTEM_TEXT % ('[[1, 0], [0, 4]]', '[[2, 0]]'), "s.json")
    assert (e.value.line, e.value.column) == (6, 6)


def test_system_missing_map_points_at_level():
    text = '{"levels": [\n {"gram": [[1]]},\n {"gram": [[1, 0], [0, 1]]}\n]}'
    with pytest.raises(LatticeFormatError, match="needs a 'map'") as e:
        io.parse_system(text)
    assert (e.value.line, e.value.column) == (3, 2)
