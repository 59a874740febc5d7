import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from varjet.cli import Model, ModelError, read_sections, run

MODELS = Path(__file__).resolve().parent.parent / "models"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def model(tmp_path, text, name="m.model"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_el_wave():
    code, out, _ = call("el", str(MODELS / "wave.model"))
    assert code == 0
    assert json.loads(out) == {"E": {"u": "-u_tt + u_xx"}}


def test_el_latex():
    code, out, _ = call("el", str(MODELS / "kg.model"), "--latex")
    assert code == 0 and "u_{tt}" in json.loads(out)["E"]["u"]


def test_order_kdv():
    code, out, _ = call("order", str(MODELS / "kdv.model"))
    assert code == 0 and json.loads(out) == {"order": 3}


def test_helmholtz_verdicts_exit_zero():
    code, out, _ = call("helmholtz", str(MODELS / "kdv.model"))
    assert code == 0 and json.loads(out)["helmholtz"]["variational"] is False
    code, out, _ = call("helmholtz", str(MODELS / "wave.model"))
    assert code == 0 and json.loads(out)["helmholtz"]["variational"] is True


def test_noether_and_symmetry():
    code, out, _ = call("noether", str(MODELS / "wave.model"), "--symmetry", "time")
    data = json.loads(out)["noether"]["time"]
    assert code == 0 and data["identity"]
    assert data["J"] == {"t": "1/2*u_t^2 + 1/2*u_x^2", "x": "-u_t*u_x"}
    code, out, _ = call("symmetry", str(MODELS / "wave.model"))
    assert code == 0 and all(v["is_symmetry"] for v in json.loads(out)["symmetry"].values())


def test_noether_failure_exit_one(tmp_path):
    text = "[signature]\nbase: x\nfields: u\n[lagrangian]\ndensity: 1/2*u_x^2 + u^3\n[symmetry shift]\nQ_u: 1\n"
    code, out, _ = call("noether", model(tmp_path, text))
    assert code == 1 and "error" in json.loads(out)["noether"]["shift"]
    code, out, _ = call("symmetry", model(tmp_path, text))
    assert code == 0 and json.loads(out)["symmetry"]["shift"]["is_symmetry"] is False


def test_variation_identity():
    code, out, _ = call("variation", str(MODELS / "wave.model"))
    assert code == 0
    assert all(v["identity"] for v in json.loads(out)["variation"].values())


def test_dh_dv():
    code, out, _ = call("dv", str(MODELS / "wave.model"), "--volume")
    data = json.loads(out)["d_V"]
    assert code == 0 and data["bidegree"] == [1, 2]
    code, out, _ = call("dh", str(MODELS / "wave.model"), "--volume")
    assert code == 0 and json.loads(out)["d_H"]["terms"] == []


def test_dv_from_form_json(tmp_path):
    form = {"bidegree": [0, 1], "terms": [{"dx": ["x"], "theta": [], "coeff": "u^2"}]}
    fp = tmp_path / "f.json"
    fp.write_text(json.dumps(form))
    code, out, _ = call("dv", str(MODELS / "wave.model"), "--form", str(fp))
    assert code == 0
    term = json.loads(out)["d_V"]["terms"][0]
    # 2u theta^dx, stored in dx-first order
    assert term["coeff"] == "-2*u" and term["dx"] == ["x"]


def test_glue_check(tmp_path):
    code, out, _ = call("glue-check", str(MODELS / "patches.model"))
    assert code == 0 and json.loads(out)["glued"]
    text = ("[signature]\nbase: x\nfields: u\n[patch a]\nbox: 0 6/5\nu: x^2\n"
            "[patch b]\nbox: 4/5 2\nu: x^3\n")
    code, out, _ = call("glue-check", model(tmp_path, text))
    data = json.loads(out)
    assert code == 1 and data["pair"] == ["a", "b"] and 0.8 < float(data["point"][0]) < 1.2


def test_axioms_sheaf_suite_and_seed(monkeypatch):
    code, out, _ = call("axioms", "--suite", "sheaf", "--cases", "5", "--seed", "4")
    data = json.loads(out)
    assert code == 0 and data["seed"] == 4 and data["passed"]
    monkeypatch.setenv("VARJET_SEED", "11")
    code, out, _ = call("axioms", "--suite", "points", "--cases", "2")
    assert json.loads(out)["seed"] == 11


def test_holonomy_command():
    code, out, _ = call("holonomy", str(MODELS / "u1.model"), "--sitting", "--steps", "1024")
    data = json.loads(out)
    assert code == 0
    assert data["composite"]["groupoid_defect"] < 1e-7
    assert data["paths"]["east"]["thin_max_deviation"] < 1e-7


@pytest.mark.parametrize("text,line,col", [
    ("[signature]\nbase: x\nfields: u\n[lagrangian]\ndensity: u_x^2 + (u*\n", 5, 21),
    ("[signature]\nbase: x\nfields: u\n[lagrangian]\ndensity: u_y\n", 5, 12),
    ("[signature]\nbase: x\nfields: u\nbogus line\n", 4, 11),
    ("[nonsense]\n", 1, 1),
])
def test_model_errors_report_line_and_column(tmp_path, text, line, col):
    code, out, err = call("el", model(tmp_path, text))
    assert code == 2 and out == ""
    assert f"line {line}, column {col}" in err


def test_usage_errors():
    assert call("frobnicate")[0] == 2
    assert call("el", "/does/not/exist.model")[0] == 2
    assert call("el")[0] == 2


def test_reader_handles_comments_and_duplicates():
    secs = read_sections("# top\n[signature]  # comment\nbase: x # trailing\nfields: u\n")
    assert secs[0].entries["base"].value == "x"
    with pytest.raises(ModelError):
        read_sections("[signature]\nbase: x\nbase: y\n")
    with pytest.raises(ModelError):
        Model("[signature]\nbase: x\nfields: x\n")


def test_console_script_determinism(tmp_path):
    cmd = [sys.executable, "-m", "varjet.cli", "axioms", "--suite", "points", "--cases", "3",
           "--seed", "5"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and b"\"seed\": 5" in a
