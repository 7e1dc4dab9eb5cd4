import csv
import io
import json
import math

import pytest

from softcover.cli import TRIAL_COLUMNS, dump_csv, fmt_float, main
from softcover.covering import kl_exact, sample_codebook
from softcover.measures import binary_symmetric_pair


@pytest.fixture
def bsc_file(tmp_path):
    path = tmp_path / "bsc.json"
    path.write_text(json.dumps({"q_u": [0.5, 0.5], "q_v_given_u": [[0.9, 0.1], [0.1, 0.9]]}))
    return str(path)


@pytest.fixture
def indep_file(tmp_path):
    path = tmp_path / "indep.json"
    path.write_text(json.dumps({"q_u": [0.5, 0.5], "q_v_given_u": [[0.3, 0.7], [0.3, 0.7]]}))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fmt_float():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert float(fmt_float(1 / 3)) == 1 / 3
    assert fmt_float(math.inf) == "Infinity"
    assert fmt_float(-math.inf) == "-Infinity"
    assert fmt_float(math.nan) == "NaN"


def test_dump_csv_line_endings():
    text = dump_csv(["a", "b"], [[1, 0.5], [True, None]])
    assert "\r" not in text
    assert text.splitlines() == ["a,b", "1,0.5", "true,"]


def test_analyze_report(capsys, bsc_file):
    code, out, _ = run(capsys, "analyze", "--channel", bsc_file, "--rate", "0.9")
    assert code == 0
    rep = json.loads(out)
    assert rep["schema_version"] == 1
    assert rep["mutual_info"] == pytest.approx(0.531004, abs=1e-6)
    assert rep["parameters_source"] == "defaults"
    cert = rep["certificate"]
    assert cert["gamma1_bits"] > 0 and cert["gamma2_bits"] > 0
    assert cert["n0"] <= cert["n_max"]
    rows = {r["n"]: r for r in rep["bounds"]}
    assert rows[1]["atypical_exact"] is not None
    assert rows[10000]["atypical_exact"] is None


def test_analyze_below_rate_is_infeasible(capsys, bsc_file):
    code, _, err = run(capsys, "analyze", "--channel", bsc_file, "--rate", "0.1")
    assert code == 3
    assert "I(U;V)" in err


def test_analyze_partial_parameters_rejected(capsys, bsc_file):
    code, _, err = run(capsys, "analyze", "--channel", bsc_file, "--rate", "0.9", "--epsilon", "0.1")
    assert code == 2
    assert "together" in err


def test_analyze_bad_given_parameters(capsys, bsc_file):
    argv = ["analyze", "--channel", bsc_file, "--rate", "0.9",
            "--epsilon", "0.1", "--beta1", "0.5", "--beta2", "0.05"]
    code, _, err = run(capsys, *argv)
    assert code == 3
    assert "beta1" in err


@pytest.mark.parametrize("text", ["{", json.dumps({"q_u": [0.5, 0.6], "q_v_given_u": [[1, 0], [0, 1]]})])
def test_malformed_channel_file(capsys, tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    code, _, err = run(capsys, "analyze", "--channel", str(path), "--rate", "0.9")
    assert code == 2
    assert "channel file" in err


def test_missing_channel_file(capsys, tmp_path):
    code, _, _ = run(capsys, "cover", "--channel", str(tmp_path / "nope.json"), "--n", "2", "--rate", "0.5")
    assert code == 2


def test_cover_single_word_by_hand(capsys, bsc_file):
    code, out, _ = run(capsys, "cover", "--channel", bsc_file, "--n", "1", "--rate", "0", "--format", "csv")
    assert code == 0
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert list(row) == TRIAL_COLUMNS
    by_hand = 0.9 * math.log2(0.9 / 0.5) + 0.1 * math.log2(0.1 / 0.5)
    assert float(row["kl_bits"]) == pytest.approx(by_hand, abs=1e-12)
    assert float(row["tv"]) == pytest.approx(0.4)


def test_cover_report(capsys, bsc_file):
    code, out, _ = run(capsys, "cover", "--channel", bsc_file, "--n", "8", "--rate", "0.8", "--seed", "42")
    assert code == 0
    rep = json.loads(out)
    assert rep["m_size"] == 84
    assert rep["kl_bits"] == pytest.approx(0.407608243551077, abs=1e-12)
    assert rep["decomposition"]["holds"] is True
    assert rep["kl_ceiling"] is not None


def test_cover_complete_codebook(capsys, bsc_file):
    code, out, _ = run(capsys, "cover", "--channel", bsc_file, "--n", "5", "--complete", "--dump-mass")
    assert code == 0
    rep = json.loads(out)
    assert rep["kl_bits"] == pytest.approx(0.0, abs=1e-12)
    assert len(rep["mass"]) == 32


def test_cover_size_guard(capsys, bsc_file):
    code, _, _ = run(capsys, "cover", "--channel", bsc_file, "--n", "27", "--rate", "0.1")
    assert code == 4


def test_cover_codebook_guard(capsys, bsc_file):
    code, _, _ = run(capsys, "cover", "--channel", bsc_file, "--n", "20", "--rate", "2")
    assert code == 4


@pytest.mark.parametrize("extra", [["--seed", "-1"], ["--workers", "0"], ["--rate", "-1"]])
def test_cover_config_errors(capsys, bsc_file, extra):
    argv = ["cover", "--channel", bsc_file, "--n", "3", "--rate", "0.5"] + extra
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_sweep_zero_trials(capsys, bsc_file):
    code, _, err = run(capsys, "sweep", "--channel", bsc_file, "--ns", "3", "--rates", "0.8", "--trials", "0")
    assert code == 2
    assert "trials" in err


def test_sweep_is_byte_deterministic(tmp_path, bsc_file):
    outputs = []
    for tag, workers in (("a", "1"), ("b", "1"), ("c", "2")):
        out, summary = tmp_path / f"{tag}.csv", tmp_path / f"{tag}_summary.csv"
        argv = ["sweep", "--channel", bsc_file, "--ns", "3", "5", "--rates", "0.8", "0.3",
                "--trials", "5", "--seed", "9", "--workers", workers,
                "--out", str(out), "--summary-out", str(summary)]
        assert main(argv) == 0
        outputs.append((out.read_bytes(), summary.read_bytes()))
    assert outputs[0] == outputs[1] == outputs[2]
    rows = list(csv.DictReader(io.StringIO(outputs[0][0].decode())))
    assert len(rows) == 20
    assert b"\r" not in outputs[0][0]


def test_wiretap_single_message_matches_cover(capsys, bsc_file):
    code, out, _ = run(capsys, "wiretap", "--channel", bsc_file, "--ns", "6",
                       "--rate-random", "0.8", "--seed", "13")
    assert code == 0
    rep = json.loads(out)
    code, cover_out, _ = run(capsys, "cover", "--channel", bsc_file, "--n", "6",
                             "--rate", "0.8", "--seed", "13")
    assert rep["runs"][0]["max_kl"] == json.loads(cover_out)["kl_bits"]
    cb = sample_codebook(binary_symmetric_pair(0.1), 6, 0.8, 13)
    assert rep["runs"][0]["max_kl"] == kl_exact(binary_symmetric_pair(0.1), cb)


def test_wiretap_independent_channel(capsys, indep_file):
    code, out, _ = run(capsys, "wiretap", "--channel", indep_file, "--ns", "3", "4",
                       "--rate-message", "0.5", "--rate-random", "0.5", "--format", "csv")
    assert code == 0
    for row in csv.DictReader(io.StringIO(out)):
        assert float(row["max_kl"]) == pytest.approx(0.0, abs=1e-12)
        assert float(row["max_pairwise_tv"]) == pytest.approx(0.0, abs=1e-12)


def test_sweep_rejects_report_format(capsys, bsc_file):
    code, _, _ = run(capsys, "sweep", "--channel", bsc_file, "--ns", "3", "--rates", "0.8",
                     "--trials", "2", "--format", "report")
    assert code == 2


def test_wiretap_warns_below_mutual_information(capsys, caplog, bsc_file):
    code, _, _ = run(capsys, "wiretap", "--channel", bsc_file, "--ns", "4", "--rate-random", "0.3")
    assert code == 0
    assert "does not exceed" in caplog.text
