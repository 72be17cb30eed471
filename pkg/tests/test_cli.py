import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from free_mimo.cli import bundled_configs, main
from free_mimo.fileio import (SWEEP_COLUMNS, MatrixFormatError, dumps_matrix,
                              format_complex, loads_matrix, parse_complex,
                              write_matrix)
from free_mimo.moments import capacity_of_channel
from free_mimo.simulation import sample_channel, sample_observation


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def obs_files(tmp_path):
    ch = sample_channel(4, 4, 2, seed=3)
    paths = []
    for i in range(3):
        p = tmp_path / f"obs{i}.csv"
        write_matrix(p, sample_observation(ch, 0.1, "plain", seed=i))
        paths.append(p)
    return ch, paths


class TestMatrixFiles:
    def test_format(self):
        assert format_complex(1.5 - 2j) == "1.5-2i"
        assert format_complex(complex(0.0, -0.0)) == "0-0i"
        assert parse_complex(" 3-0.5i ") == 3 - 0.5j

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.complex_numbers(allow_nan=False, allow_infinity=False),
                    min_size=6, max_size=6))
    def test_roundtrip_bit_identical(self, vals):
        M = np.array(vals).reshape(2, 3)
        back = loads_matrix(dumps_matrix(M))
        assert back.tobytes() == M.astype(complex).tobytes()

    @pytest.mark.parametrize("text", [
        "", "2,2\n1,2\n", "2\n1\n", "1,2\n1+1i\n", "1,1\nfoo\n", "1,1\nnan+0i\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(MatrixFormatError):
            loads_matrix(text)


class TestEstimate:
    def test_success(self, capsys, obs_files):
        ch, paths = obs_files
        code, out, _ = run(capsys, "estimate", *paths, "--sigma2", 0.1, "--rank", 2)
        assert code == 0
        reports = json.loads(out)
        assert [r["estimator"] for r in reports] == ["Cf", "CG", "C1", "C2", "C3"]
        assert len(reports[0]["moments"]) == 2

    def test_noiseless_matches_true_capacity(self, capsys, tmp_path):
        ch = sample_channel(4, 4, 3, seed=8)
        p = tmp_path / "h.csv"
        write_matrix(p, ch.H)
        code, out, _ = run(capsys, "estimate", p, "--sigma2", 0, "--rank", 3,
                           "--capacity-sigma2", 0.1)
        assert code == 0
        for rep in json.loads(out):
            assert rep["capacity"] == pytest.approx(capacity_of_channel(ch.H, 0.1), abs=1e-9)

    def test_bad_file(self, capsys, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("2,2\n1,2\n")
        code, _, err = run(capsys, "estimate", p, "--sigma2", 0.1, "--rank", 1)
        assert code == 1
        assert "free-mimo:" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "estimate", tmp_path / "nope.csv", "--sigma2", 0.1)
        assert code == 1

    def test_stacking_refused(self, capsys, obs_files):
        _, paths = obs_files
        code, _, err = run(capsys, "estimate", *paths, "--sigma2", 0.1, "--rank", 2,
                           "--model", "phase", "--estimators", "Cf")
        assert code == 2
        assert "--force" in err
        code, out, _ = run(capsys, "estimate", *paths, "--sigma2", 0.1, "--rank", 2,
                           "--model", "phase", "--estimators", "Cf", "--force")
        assert code == 0
        assert json.loads(out)[0]["flags"] == ["stacking_invalid_for_model"]

    def test_missing_rank(self, capsys, obs_files):
        _, paths = obs_files
        code, _, _ = run(capsys, "estimate", *paths, "--sigma2", 0.1, "--estimators", "CG")
        assert code == 2

    def test_unknown_estimator(self, obs_files):
        _, paths = obs_files
        with pytest.raises(SystemExit):
            main(["estimate", str(paths[0]), "--sigma2", "0.1", "--estimators", "C7"])


class TestExperiment:
    def test_bundled_names(self):
        assert {"fig1", "fig2", "fig4"} <= set(bundled_configs())

    def test_byte_identical(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(capsys, "experiment", "fig2", "--trials", 30, "--out", a)[0] == 0
        assert run(capsys, "experiment", "fig2", "--trials", 30, "--out", b)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        rows = list(csv.DictReader(io.StringIO(a.read_text())))
        assert list(rows[0]) == SWEEP_COLUMNS
        assert len(rows) == 2 * 15

    def test_seed_override_changes_output(self, capsys):
        _, a, _ = run(capsys, "experiment", "fig2", "--trials", 20)
        _, b, _ = run(capsys, "experiment", "fig2", "--trials", 20, "--seed", 99)
        assert a != b

    def test_noiseless_config(self, capsys, tmp_path):
        cfg = dict(n=4, m=4, L=[1], rank=3, sigma2=[0.0], trials=1, seed=0,
                   capacity_sigma2=0.1, estimators=["Cf", "CG", "C1", "C2", "C3"])
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        code, out, _ = run(capsys, "experiment", p)
        assert code == 0
        for row in csv.DictReader(io.StringIO(out)):
            assert float(row["mean_capacity"]) == pytest.approx(
                float(row["true_capacity"]), abs=1e-12)
            assert float(row["se_capacity"]) == 0

    def test_invalid_config(self, capsys, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(dict(n=4, m=4, L=[1], rank=9, sigma2=[0.1],
                                     trials=1, seed=0)))
        assert run(capsys, "experiment", p)[0] == 1
        p.write_text("{not json")
        assert run(capsys, "experiment", p)[0] == 1
        assert run(capsys, "experiment", "fig99")[0] == 1


class TestOracle:
    def test_table(self, capsys):
        code, out, _ = run(capsys, "oracle", "--table", "s3")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 6
        assert rows[4] == {"pi": "(3,1,2)", "pi_hat": "(4,5,6,1,2,3)",
                           "classes": "{{1,3,5},{2,4,6}}", "k": "1", "l": "1"}

    def test_moments(self, capsys):
        assert run(capsys, "oracle", "--moments", 2, 4, 3)[1].strip() == "45/16"
        assert run(capsys, "oracle", "--moments", 1, 1, 1)[1].strip() == "1"
        assert run(capsys, "oracle", "--moments", 2, 2, 9)[0] == 2

    def test_lemma1(self, capsys):
        code, out, _ = run(capsys, "oracle", "--lemma1", 4, 4, 0.25, 10000, 1)
        assert code == 0
        checks = json.loads(out)
        assert [c["order"] for c in checks] == [1, 2, 3, 4]

    def test_lemma1_trials_guard(self, capsys):
        assert run(capsys, "oracle", "--lemma1", 4, 4, 0.25, 10, 1)[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "free_mimo", "oracle", "--moments", "1", "1", "3"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.strip() == "6"
