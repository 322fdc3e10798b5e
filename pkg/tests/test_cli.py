import csv
import json
import subprocess
import sys

import pytest

from berkline.cli import main, plain, render_float
from berkline.groups import group_to_config, symmetric_rank_two_example


def run(tmp_path, argv, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    out = tmp_path / "out"
    code = main([*argv, "--config", str(path), "--out", str(out)])
    return code, out


def load(out, name):
    data = json.loads((out / name).read_text())
    assert data["schema"] == "berkline/1"
    return data


SINGLE = {"p": 3, "disks": [{"center": "0", "radius_exp": "1"}]}


def test_render_float_significant_digits():
    assert render_float(1 / 3) == "0.333333333333333"
    assert plain(0.1 + 0.2) == 0.3
    assert plain(float("inf")) == "inf"
    from fractions import Fraction
    assert plain(Fraction(-3, 4)) == "-3/4"


def test_tree_spectrum_rows(tmp_path):
    code, out = run(tmp_path, ["tree", "spectrum"], SINGLE)
    assert code == 0
    rows = list(csv.reader((out / "spectrum.csv").read_text().splitlines()))
    assert rows[0] == ["eigenvalue", "multiplicity"]
    assert sorted((float(a), int(b)) for a, b in rows[1:]) == [(-1.0, 2), (1.0, 2)]
    assert load(out, "spectrum.json")["operator_norm"] == "1/1"


def test_tree_axioms_and_morphism(tmp_path):
    cfg = {"p": 2, "disks": [{"center": "0", "radius_exp": "1"}, {"center": "1", "radius_exp": "2"}],
           "extension": [{"center": "5", "radius_exp": "3"}]}
    code, out = run(tmp_path, ["tree", "axioms"], cfg)
    assert code == 0
    rep = load(out, "axioms.json")
    assert rep["commutator_minus_lipschitz"] in (0, "0/1") or rep["commutator_minus_lipschitz"].startswith("-")
    assert all(v in (0, "0/1") for v in rep["residuals"].values())
    code, out = run(tmp_path, ["tree", "morphism"], cfg)
    assert code == 0
    assert all(v in (0, "0/1") for v in load(out, "morphism.json")["residuals"].values())
    code, out = run(tmp_path, ["tree", "build"], cfg)
    assert code == 0 and "tree" in load(out, "tree.json")


def test_tree_errors(tmp_path):
    bad = {"p": 3, "disks": [{"center": "1/x", "radius_exp": "1"}]}
    assert run(tmp_path, ["tree", "build"], bad)[0] == 2
    assert run(tmp_path, ["tree", "build"], "{not json")[0] == 2
    assert run(tmp_path, ["tree", "build"], {"p": 4, "disks": []})[0] == 2
    outside = {"p": 3, "disks": [{"center": "0", "radius_exp": "-1"}]}
    assert run(tmp_path, ["tree", "build"], outside)[0] == 3


def test_dendrite(tmp_path):
    cfg = {"comb": {"farey": 2}, "points": [{"prefix": ["1/2"], "tail": {"kind": "end", "index": 1}},
                                            {"prefix": [], "tail": {"kind": "letter", "value": "1/3"}}]}
    code, out = run(tmp_path, ["dendrite", "classify"], cfg)
    assert code == 0
    assert [r["type"] for r in load(out, "classify.json")["points"]] == ["IV", "II"]
    code, out = run(tmp_path, ["dendrite", "admissible"], {"comb": {"farey": 2}, "words": ["1/3,1/2", "", "1/2,1/3"]})
    assert code == 0
    assert [r["admissible"] for r in load(out, "admissible.json")["words"]] == [True, True, False]


def test_shift_relations_and_pf(tmp_path):
    code, out = run(tmp_path, ["shift", "verify-relations"], {"N": 2, "D": 2})
    assert code == 0
    assert all(r["residual"] == 0 for r in load(out, "relations.json")["reports"])
    point = {"prefix": ["1/3"], "tail": {"kind": "letter", "value": "1/2"}}
    code, out = run(tmp_path, ["shift", "pf"], {"N": 2, "D": 2, "pairs": 5, "input": [{"point": point}]})
    assert code == 0
    rep = load(out, "pf.json")
    assert rep["output"] == [{"point": {"prefix": [], "tail": {"kind": "letter", "value": "1/2"}}, "value": "1/1"}]
    assert rep["adjointness_residual"] <= 1e-12


@pytest.mark.parametrize("action,artifact", [("partition", "partition.json"), ("pvm", "pvm.json"),
                                             ("spectral-integral", "spectral_integral.json"),
                                             ("cyclic", "cyclic.json")])
def test_shift_actions(tmp_path, action, artifact):
    cfg = {"N": 2, "D": 2, "f": [{"coeff": [1, 2], "word": "1/2"}, {"coeff": 3, "word": "1/3"}]}
    code, out = run(tmp_path, ["shift", action], cfg)
    assert code == 0
    assert load(out, artifact)["basis_size"] > 0


def test_shift_inadmissible_input(tmp_path):
    point = {"prefix": ["1/2", "1/2", "1/2"], "tail": {"kind": "end", "index": 1}}
    assert run(tmp_path, ["shift", "pf"], {"N": 2, "D": 1, "input": [{"point": point}]})[0] == 3


GROUP = group_to_config(symmetric_rank_two_example())


def test_group_orbit_trivial(tmp_path):
    code, out = run(tmp_path, ["group", "orbit"], {**GROUP, "L": 0})
    assert code == 0
    assert (out / "orbit.csv").read_text().splitlines() == ["word,rho", "e,0/1"]


@pytest.mark.parametrize("action,artifact", [("delta", "delta.json"), ("poincare", "poincare.json"),
                                             ("quasiconformal", "quasiconformal.json"), ("kms", "kms.json"),
                                             ("hamiltonian", "hamiltonian.json")])
def test_group_actions(tmp_path, action, artifact):
    code, out = run(tmp_path, ["group", action], {**GROUP, "L": 6})
    assert code == 0
    load(out, artifact)


def test_group_pole_word(tmp_path, capsys):
    cfg = {"p": 5, "generators": [[["0", "1"], ["1", "0"]]], "L": 2}
    assert run(tmp_path, ["group", "orbit"], cfg)[0] == 3
    assert "word a" in capsys.readouterr().err


def test_group_caps(tmp_path):
    assert run(tmp_path, ["group", "orbit"], {**GROUP, "L": 13})[0] == 2


def test_failed_check_exit_code(tmp_path):
    code, out = run(tmp_path, ["group", "kms"], {**GROUP, "L": 6, "tolerance": 1e-9})
    assert code == 1
    assert (out / "kms.json").exists()


def test_threads_byte_identical(tmp_path):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({**GROUP, "L": 7}))
    blobs = []
    for threads in ("1", "8"):
        out = tmp_path / f"t{threads}"
        for action in ("orbit", "ps-measure", "kms"):
            subprocess.run([sys.executable, "-m", "berkline", "group", action, "--config", str(cfg),
                            "--out", str(out), "--threads", threads], check=True, capture_output=True)
        blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert blobs[0] == blobs[1]
