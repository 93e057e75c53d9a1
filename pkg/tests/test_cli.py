import json

import pytest

from circlemethod.cli import main
from circlemethod.document import document_from_system, parse_system, serialize_system
from circlemethod.errors import InputError

from conftest import FIXTURES, quadric_system

MINIMAL = {
    "schema_version": "1",
    "n": 2,
    "M": 1,
    "box": [[-1, 1], [-1, 1]],
    "forms": [{"degree": 1, "monomials": [{"coeff": 1, "exps": [1, 0]}, {"coeff": -1, "exps": [0, 1]}]}],
}


def dump(obj):
    return json.dumps(obj)


class TestDocument:
    def test_minimal(self):
        doc = parse_system(dump(MINIMAL))
        S = doc.to_system()
        assert S.n == 2 and S.R == 1

    def test_round_trip(self):
        raw = dict(MINIMAL, m0=[0, 0], box=[["-1/2", 1], [-1, "3/4"]], overrides={"B": {"1": 0}}, budgets={"count": 5}, seed=9)
        doc = parse_system(dump(raw))
        text = serialize_system(doc)
        assert parse_system(text) == doc
        assert serialize_system(parse_system(text)) == text

    def test_round_trip_from_system(self):
        doc = document_from_system(quadric_system())
        assert parse_system(serialize_system(doc)) == doc
        assert doc.to_system() == quadric_system()

    def test_m0_equal_to_M(self):
        with pytest.raises(InputError, match=r"m0 coordinate 0 out of \[0, M-1\]"):
            parse_system(dump(dict(MINIMAL, M=2, m0=[2, 0])))

    def test_exponent_sum(self):
        bad = json.loads(dump(MINIMAL))
        bad["forms"][0]["monomials"][1]["exps"] = [0, 2]
        with pytest.raises(InputError, match="monomial index 1"):
            parse_system(dump(bad))

    def test_unknown_field(self):
        with pytest.raises(InputError, match="'colour'"):
            parse_system(dump(dict(MINIMAL, colour="red")))
        bad = json.loads(dump(MINIMAL))
        bad["forms"][0]["weight"] = 3
        with pytest.raises(InputError, match=r"forms\[0\]: unknown field 'weight'"):
            parse_system(dump(bad))

    def test_malformed_json(self):
        with pytest.raises(InputError, match="line 2"):
            parse_system('{\n "n": }')

    def test_schema_version(self):
        with pytest.raises(InputError, match="schema_version"):
            parse_system(dump(dict(MINIMAL, schema_version="2")))

    def test_box_strings(self):
        with pytest.raises(InputError, match=r"box\[1\]\[0\]"):
            parse_system(dump(dict(MINIMAL, box=[[-1, 1], ["a", 1]])))


def run(capsys, *argv, stdin=None, monkeypatch=None):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def linear_path(tmp_path):
    p = tmp_path / "linear.json"
    p.write_text(dump(MINIMAL))
    return p


class TestCli:
    def test_count(self, capsys, linear_path):
        code, out, _ = run(capsys, "count", linear_path, "--P", 10, "--json")
        assert code == 0
        res = json.loads(out)["results"]
        assert res["count"] == {"tag": "exact-rational", "num": "21", "den": "1"}

    def test_csv_matches_json(self, capsys, linear_path):
        _, out_csv, _ = run(capsys, "count", linear_path, "--P", 10)
        assert "count,21" in out_csv.splitlines()

    def test_stdin(self, capsys, monkeypatch):
        import io

        monkeypatch.setattr("sys.stdin", io.StringIO(dump(MINIMAL)))
        code, out, _ = run(capsys, "polar", "--json")
        assert code == 0
        terms = json.loads(out)["results"]["polar_forms"][0]["terms"]
        assert [t["indices"] for t in terms] == [[0], [1]]

    def test_usage_error(self, capsys, linear_path):
        code, _, err = run(capsys, "count", linear_path)
        assert code == 1 and "--P" in err
        code, _, _ = run(capsys, "frobnicate")
        assert code == 1

    def test_validation_error(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(dump(dict(MINIMAL, M=2, m0=[2, 0])))
        code, _, err = run(capsys, "count", p, "--P", 3)
        assert code == 2 and "m0 coordinate" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "count", tmp_path / "nope.json", "--P", 3)
        assert code == 2

    def test_budget_refusal(self, capsys):
        code, _, err = run(capsys, "count", FIXTURES / "quadric.json", "--P", 1000, "--budget", 10**6)
        assert code == 3 and "would scan" in err

    def test_non_convergence(self, capsys, tmp_path):
        p = tmp_path / "xy.json"
        doc = dict(MINIMAL, forms=[{"degree": 2, "monomials": [{"coeff": 1, "exps": [1, 1]}]}])
        p.write_text(dump(doc))
        code, _, err = run(capsys, "densities", p, "--p-max", 5, "--k-max", 3, "--samples", 10**4)
        assert code == 4 and "p=2" in err

    def test_check_quadratic_cubic(self, capsys):
        code, out, _ = run(capsys, "check", FIXTURES / "quad_cubic_37.json", "--json")
        res = json.loads(out)["results"]
        assert code == 0 and res["verdicts"]["theorem_main"] is True
        for m in res["condition_margins"].values():
            assert int(m["num"]) < int(m["den"])

    def test_check_override_flag(self, capsys):
        code, out, _ = run(capsys, "check", FIXTURES / "quad_cubic_37.json", "--json", "--B", "3=5")
        res = json.loads(out)["results"]
        assert res["verdicts"]["theorem_main"] is False

    def test_expsum_modes(self, capsys, linear_path):
        code, out, _ = run(capsys, "expsum", linear_path, "--series", 6, "--json")
        assert code == 0 and json.loads(out)["results"]["value"]["value"] == pytest.approx(1)
        code, out, _ = run(capsys, "expsum", linear_path, "--complete", 5, "--a", 2, "--json")
        # a(x - y) with gcd(a, q) = 1 sums to zero over a full period
        assert json.loads(out)["results"]["real"]["value"] == pytest.approx(0, abs=1e-9)
        code, out, _ = run(capsys, "expsum", linear_path, "--alpha", "1/2", "--P", 3, "--json")
        assert code == 0
        code, _, _ = run(capsys, "expsum", linear_path, "--alpha", "1/2")
        assert code == 1

    def test_every_number_is_tagged(self, capsys, linear_path):
        _, out, _ = run(capsys, "densities", linear_path, "--p-max", 7, "--samples", 20000, "--P", 10, "--json")

        def walk(v, key=""):
            if isinstance(v, dict):
                if "tag" in v:
                    assert v["tag"] in ("exact-rational", "float-with-error")
                    return
                for k, x in v.items():
                    walk(x, k)
            elif isinstance(v, list):
                for x in v:
                    walk(x, key)
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                # plain numbers are only allowed for configuration echoes
                assert key in ("p_max", "samples", "seed", "streams", "eps_schedule")

        walk(json.loads(out)["results"])

    def test_byte_identical_reruns(self, capsys, linear_path):
        args = ("densities", linear_path, "--p-max", 11, "--samples", 20000, "--seed", 4, "--json")
        _, a, _ = run(capsys, *args)
        _, b, _ = run(capsys, *args, "--threads", 3)
        assert a == b
