import json

import numpy as np
import pytest

from cogsec.channel import AuxiliaryPolicy, serialize_channel_spec, serialize_policy
from cogsec.cli import main
from cogsec.instances import noiseless_orthogonal, pure_noise, uniform_split_policy, wiretap


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    spec = noiseless_orthogonal()
    return {
        "dir": tmp_path,
        "write": write,
        "spec": write("noiseless.json", serialize_channel_spec(spec)),
        "policy": write("split.json", serialize_policy(uniform_split_policy(spec))),
        "noise": write("noise.json", serialize_channel_spec(pure_noise())),
        "noise_policy": write("noise_split.json", serialize_policy(uniform_split_policy(pure_noise()))),
        "wiretap": write("wiretap.json", serialize_channel_spec(wiretap())),
    }


def test_validate_ok(files, capsys):
    assert main(["validate", files["spec"]]) == 0
    assert "valid" in capsys.readouterr().out


def test_validate_bad_slice(files, capsys):
    k = noiseless_orthogonal().kernel.copy()
    k[0, 1, 1] *= 0.9
    doc = json.loads(serialize_channel_spec(noiseless_orthogonal()))
    doc["kernel"] = k.tolist()
    path = files["write"]("bad.json", json.dumps(doc))
    assert main(["validate", path]) == 1
    out = capsys.readouterr().out
    assert "s=0,x1=1,x2=1" in out and "0.9" in out


def test_validate_malformed(files, capsys):
    path = files["write"]("broken.json", '{"alphabets": {"x1": 2,,}')
    assert main(["validate", path]) == 2
    assert "line 1 col" in capsys.readouterr().err


def test_validate_unreadable(files, capsys):
    assert main(["validate", str(files["dir"] / "missing.json")]) == 2
    assert "cannot read" in capsys.readouterr().err


@pytest.mark.parametrize("bound", ["inner", "outer"])
def test_eval_noiseless(files, capsys, bound):
    assert main(["eval", files["spec"], files["policy"], "--bound", bound]) == 0
    assert json.loads(capsys.readouterr().out) == {"r1": 1.0, "r2": 1.0, "re2": 1.0}


def test_eval_noise_zero(files, capsys):
    assert main(["eval", files["noise"], files["noise_policy"]]) == 0
    assert json.loads(capsys.readouterr().out) == {"r1": 0.0, "r2": 0.0, "re2": 0.0}


def test_eval_dimension_mismatch(files, capsys):
    pol = AuxiliaryPolicy([1 / 3] * 3, np.full((1, 3, 1, 1, 2), 0.5))
    path = files["write"]("wide.json", serialize_policy(pol))
    assert main(["eval", files["spec"], path]) == 1


def test_eval_twelve_digits(files, capsys):
    pol = files["write"]("wt_split.json", serialize_policy(uniform_split_policy(wiretap())))
    assert main(["eval", files["wiretap"], pol]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["re2"] == 0.811278124459


def test_reduce_kinds(files, capsys):
    assert main(["reduce", files["spec"], files["policy"], "--kind", "no-secrecy"]) == 0
    assert json.loads(capsys.readouterr().out) == {"r1": 1.0, "r2": 1.0}
    assert main(["reduce", files["spec"], files["policy"], "--kind", "case-split"]) == 0
    assert json.loads(capsys.readouterr().out)["regime"] == "OutputDominant"


def _search(files, out, *extra):
    args = ["search", files["spec"], "--sampler", "grid", "--grid", "3", "--u-size", "1", "--v-size", "2"]
    return main(args + ["--workers", "1", "--out", str(out), *extra])


def test_search_outputs_and_manifest(files):
    out = files["dir"] / "run" / "a"
    assert _search(files, out) == 0
    csv_text = (out.parent / "a.csv").read_text()
    side = json.loads((out.parent / "a.json").read_text())
    manifest = json.loads((out.parent / "a.manifest.json").read_text())
    assert csv_text.splitlines()[0] == "r1,r2,re2,policy_id"
    assert side["manifest"] == manifest["digest"]
    assert {o["path"] for o in manifest["outputs"]} == {"a.csv", "a.json"}
    assert [1.0, 1.0, 1.0] in side["hull"]


def test_search_byte_identical(files):
    a, b = files["dir"] / "x" / "r", files["dir"] / "y" / "r"
    assert _search(files, a) == 0 and _search(files, b) == 0
    for suffix in (".csv", ".json", ".manifest.json"):
        assert (a.parent / ("r" + suffix)).read_bytes() == (b.parent / ("r" + suffix)).read_bytes()


def test_search_degenerate_origin_only(files):
    out = files["dir"] / "n"
    main(["search", files["noise"], "--sampler", "grid", "--grid", "3", "--u-size", "1", "--v-size", "2",
          "--workers", "1", "--out", str(out)])
    assert json.loads((files["dir"] / "n.json").read_text())["hull"] == [[0.0, 0.0, 0.0]]


def test_search_resource_cap(files, monkeypatch, capsys):
    monkeypatch.setenv("COGSEC_MAX_CELLS", "10")
    assert _search(files, files["dir"] / "cap") == 3
    assert "cap" in capsys.readouterr().err


def test_simulate_noiseless(files, capsys):
    assert main(["simulate", files["spec"], "--n", "16", "--r1", "0.125", "--r2", "0.125", "--trials", "50"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["pe1"] == 0.0 and rep["pe2"] == 0.0


def test_simulate_byte_identical(files):
    outs = []
    for name in ("s1", "s2"):
        prefix = files["dir"] / name / "sim"
        args = ["simulate", files["wiretap"], "--n", "10", "--r1", "0", "--r2", "0.4", "--trials", "20",
                "--seed", "3", "--log", "--out", str(prefix)]
        assert main(args) == 0
        outs.append([(prefix.parent / ("sim" + s)).read_bytes() for s in (".json", ".trials.csv", ".manifest.json")])
    assert outs[0] == outs[1]
    rep = json.loads(outs[0][0])
    assert rep["manifest"] == json.loads(outs[0][2])["digest"]


def test_simulate_cap(files, capsys):
    args = ["simulate", files["wiretap"], "--n", "12", "--r1", "0", "--r2", "1.3", "--trials", "1"]
    assert main(args) == 3


def test_example_command(files):
    assert main(["example", "wiretap", "--out", str(files["dir"] / "ex")]) == 0
    assert main(["validate", str(files["dir"] / "ex" / "wiretap.json")]) == 0


def test_inputs_untouched(files):
    before = open(files["spec"], "rb").read()
    _search(files, files["dir"] / "u")
    assert open(files["spec"], "rb").read() == before

