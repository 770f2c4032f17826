from __future__ import annotations

import copy
import json
import stat

import pytest

from smproof import cli
from smproof.certio import digest_of, read_document, write_document
from smproof.integrator import EnclosureFailure


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "not" / "yet" / "there"
    code = cli.main(["full", "--out", str(out)])
    return code, out


def _status(out):
    return json.loads((out / "status.json").read_text())


def test_full_run_certifies(full_run):
    code, out = full_run
    assert code == cli.EXIT_OK
    st_ = _status(out)
    assert st_["certified"] and st_["state"] == "certified"
    assert st_["stages"] == {"homoclinic": "certified", "separatrix": "certified"}
    names = {"homoclinic.json", "homoclinic_tube.csv", "separatrix.json", "separatrix_tube.csv"}
    assert names == set(st_["outputs"])
    assert {p.name for p in out.iterdir()} == names | {"status.json"}
    for name in names:
        assert stat.S_IMODE((out / name).stat().st_mode) == 0o644
    hom = read_document(out / "homoclinic.json")
    assert float(hom["payload"]["h_left"]["lo"]) > 0 > float(hom["payload"]["h_right"]["hi"])
    sep = read_document(out / "separatrix.json")
    lo, hi = float(sep["payload"]["ratio_A"]["lo"]), float(sep["payload"]["ratio_A"]["hi"])
    assert lo <= 0.6267320984754 and hi >= 0.62597007201516


def test_verify_command(full_run, capsys):
    _, out = full_run
    assert cli.main(["verify", str(out / "separatrix.json")]) == cli.EXIT_OK
    assert cli.main(["verify", "--shallow", str(out / "homoclinic.json")]) == cli.EXIT_OK
    assert "OK homoclinic" in capsys.readouterr().out


def test_rerun_is_bit_identical(full_run, homoclinic_doc, tmp_path):
    _, out = full_run
    assert read_document(out / "homoclinic.json") == homoclinic_doc
    assert cli.main(["prove-homoclinic", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert (tmp_path / "homoclinic.json").read_bytes() == (out / "homoclinic.json").read_bytes()
    assert (tmp_path / "homoclinic_tube.csv").read_bytes() == (out / "homoclinic_tube.csv").read_bytes()


def test_separatrix_from_stored_certificate(full_run, tmp_path):
    _, out = full_run
    code = cli.main(["prove-separatrix", "--homoclinic", str(out / "homoclinic.json"), "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert (tmp_path / "separatrix.json").read_bytes() == (out / "separatrix.json").read_bytes()


def test_edited_certificate_is_rejected(full_run, tmp_path, capsys):
    _, out = full_run
    doc = copy.deepcopy(read_document(out / "homoclinic.json"))
    doc["payload"]["h_left"]["lo"] = "1e-7"
    write_document(tmp_path / "edited.json", doc)
    code = cli.main(["prove-separatrix", "--homoclinic", str(tmp_path / "edited.json"),
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_VERIFY
    assert "does not verify" in capsys.readouterr().err
    assert not _status(tmp_path / "o")["certified"]
    # a consistent digest does not help: the stored signs are recomputed
    doc["digest"] = digest_of(doc["payload"])
    write_document(tmp_path / "edited.json", doc)
    assert cli.main(["verify", str(tmp_path / "edited.json")]) == cli.EXIT_VERIFY


def test_small_rho_reports_link_violation(full_run, tmp_path, capsys):
    _, out = full_run
    cfg = tmp_path / "small.cfg"
    cfg.write_text("rho_backward = 1e-6\n")
    code = cli.main(["prove-separatrix", "--config", str(cfg), "--homoclinic", str(out / "homoclinic.json"),
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_ADMISSIBILITY
    assert "rho-t-r-link violated" in capsys.readouterr().err
    st_ = _status(tmp_path / "o")
    assert st_["exit_code"] == 5 and "rho-t-r-link violated" in st_["message"]


def test_export_tube(full_run, tmp_path):
    _, out = full_run
    csv = tmp_path / "tube.csv"
    assert cli.main(["export-tube", str(out / "homoclinic.json"), "--csv", str(csv)]) == cli.EXIT_OK
    assert csv.read_bytes() == (out / "homoclinic_tube.csv").read_bytes()
    assert csv.read_text().splitlines()[0] == "t_lo,t_hi,X_lo,X_hi,Y_lo,Y_hi,Z_lo,Z_hi"


def test_unresolved_signs_exit_2(tmp_path, capsys):
    cfg = tmp_path / "far.cfg"
    cfg.write_text("a_left = 1.9\na_right = 1.9001\n")
    assert cli.main(["prove-homoclinic", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_SIGN
    assert "homoclinic stage" in capsys.readouterr().err
    assert not (tmp_path / "homoclinic.json").exists()
    assert _status(tmp_path)["state"] == "failed"


def test_malformed_inputs_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("R = fast\n")
    assert cli.main(["full", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert "cannot parse" in capsys.readouterr().err
    assert cli.main(["full", "--config", str(tmp_path / "absent.cfg")]) == cli.EXIT_USAGE
    assert cli.main(["no-such-command"]) == cli.EXIT_USAGE
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert cli.main(["verify", str(junk)]) == cli.EXIT_USAGE


def test_enclosure_failure_exit_3(tmp_path, monkeypatch):
    def fail(*args, **kwargs):
        raise EnclosureFailure("step size underflow", 3.5)

    monkeypatch.setattr(cli, "prove_homoclinic", fail)
    assert cli.main(["full", "--out", str(tmp_path)]) == cli.EXIT_ENCLOSURE
    assert "homoclinic stage" in _status(tmp_path)["message"]


def test_interrupted_run_is_not_certified(tmp_path, monkeypatch):
    def interrupt(*args, **kwargs):
        raise KeyboardInterrupt

    monkeypatch.setattr(cli, "prove_homoclinic", interrupt)
    with pytest.raises(KeyboardInterrupt):
        cli.main(["full", "--out", str(tmp_path)])
    st_ = _status(tmp_path)
    assert st_["state"] == "interrupted" and not st_["certified"]
    assert st_["stages"]["homoclinic"] == "running"
