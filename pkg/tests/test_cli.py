import os
import subprocess
import sys
from pathlib import Path

import pytest

PKG = Path(__file__).resolve().parent.parent


def run_cli(args, cwd, env_extra=None):
    env = dict(os.environ)
    env["PYTHONPATH"] = str(PKG / "src")
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "lmt.cli", *args],
        cwd=cwd, env=env, capture_output=True, text=True,
    )


TOY = """(declare-bool p)
(assert-soft p :id f1 :weight 1 :cost bool)
(assert-soft (not p) :id f2 :weight 2 :cost bool)
"""

INFEASIBLE = """(declare-real x 0 10)
(assert (< x 1))
(assert (> x 2))
"""


class TestSolve:
    def test_toy_output_and_exit(self, tmp_path):
        (tmp_path / "toy.lmt").write_text(TOY)
        res = run_cli(["solve", "toy.lmt"], tmp_path)
        assert res.returncode == 0
        assert res.stdout == "status optimum\nobjective 1\n(= p false)\n"

    def test_infeasible_exit_1(self, tmp_path):
        (tmp_path / "bad.lmt").write_text(INFEASIBLE)
        res = run_cli(["solve", "bad.lmt"], tmp_path)
        assert res.returncode == 1
        assert res.stdout == "status infeasible\n"

    def test_parse_error_exit_2(self, tmp_path):
        (tmp_path / "broken.lmt").write_text("(declare-real x 0")
        res = run_cli(["solve", "broken.lmt"], tmp_path)
        assert res.returncode == 2

    def test_usage_error_exit_3(self, tmp_path):
        res = run_cli(["solve"], tmp_path)
        assert res.returncode == 3
        res = run_cli(["frobnicate"], tmp_path)
        assert res.returncode == 3

    def test_mode_mismatch_exit_3(self, tmp_path):
        (tmp_path / "omt.lmt").write_text(
            "(declare-real x 0 10)(assert-soft (< x 2) :id f :weight 1 :cost linear)"
        )
        res = run_cli(["solve", "omt.lmt", "--mode", "maxsmt"], tmp_path)
        assert res.returncode == 3

    def test_witness_rationals_exact(self, tmp_path):
        (tmp_path / "q.lmt").write_text(
            "(declare-real x 0 10)\n(assert (>= (* 3 x) 1))\n"
        )
        res = run_cli(["solve", "q.lmt"], tmp_path)
        assert res.returncode == 0
        assert "(= x 1/3)" in res.stdout
        assert "." not in res.stdout.split("objective")[1].splitlines()[0]


@pytest.fixture(scope="module")
def housing_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("housing")
    res = run_cli(["gen", "--task", "housing", "--seed", "42", "--n", "10",
                   "--out-dir", "data"], d)
    assert res.returncode == 0, res.stderr
    return d


class TestPipeline:
    def test_gen_outputs(self, housing_dir):
        data = housing_dir / "data"
        for name in ("problem.lmt", "examples.data", "train.data", "test.data", "truth.model"):
            assert (data / name).exists()
        train = (data / "train.data").read_text().strip().splitlines()
        test = (data / "test.data").read_text().strip().splitlines()
        assert len(train) == 6 and len(test) == 4

    def test_train_predict_eval(self, housing_dir):
        d = housing_dir
        res = run_cli(["train", "--problem", "data/problem.lmt", "--data", "data/train.data",
                       "--C", "100", "--eps", "0.001", "--out", "model"], d)
        assert res.returncode == 0, res.stderr
        assert (d / "model").exists() and (d / "model.log").exists()
        model_text = (d / "model").read_text()
        assert model_text.startswith("#C=100\n#eps=1/1000\n")

        res = run_cli(["predict", "--problem", "data/problem.lmt", "--model", "model",
                       "--data", "data/test.data", "--out", "preds"], d)
        assert res.returncode == 0, res.stderr

        res = run_cli(["eval", "--pred", "preds", "--gold", "data/test.data"], d)
        assert res.returncode == 0, res.stderr
        lines = dict(line.split("=", 1) for line in res.stdout.strip().splitlines())
        assert set(lines) == {"mean_hamming", "bool_accuracy", "mae", "exact_recovery"}
        from fractions import Fraction
        assert Fraction(lines["exact_recovery"]) >= Fraction(9, 10)

    def test_gen_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            res = run_cli(["gen", "--task", "activity", "--seed", "9", "--n", "3",
                           "--out-dir", sub], tmp_path)
            assert res.returncode == 0, res.stderr
        for name in ("problem.lmt", "examples.data"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_lmt_seed_env(self, tmp_path):
        res = run_cli(["gen", "--task", "activity", "--n", "2", "--out-dir", "c"],
                      tmp_path, env_extra={"LMT_SEED": "9"})
        assert res.returncode == 0, res.stderr
        res2 = run_cli(["gen", "--task", "activity", "--seed", "9", "--n", "2",
                        "--out-dir", "d"], tmp_path)
        assert res2.returncode == 0
        assert (tmp_path / "c" / "problem.lmt").read_bytes() == \
               (tmp_path / "d" / "problem.lmt").read_bytes()

    def test_model_problem_mismatch(self, housing_dir, tmp_path):
        (tmp_path / "other.lmt").write_text(TOY)
        res = run_cli(["predict", "--problem", str(tmp_path / "other.lmt"),
                       "--model", "model", "--data", "data/test.data",
                       "--out", "x"], housing_dir)
        assert res.returncode == 2


class TestTimeout:
    def test_timeout_exit_4(self, tmp_path):
        # a somewhat fat search so that 0 seconds always expires
        lines = []
        for i in range(12):
            lines.append(f"(declare-bool b{i})")
        for i in range(11):
            lines.append(
                f"(assert-soft (or b{i} (not b{i + 1})) :id s{i} :weight {i % 3 + 1} :cost bool)"
            )
        (tmp_path / "slow.lmt").write_text("\n".join(lines))
        res = run_cli(["solve", "slow.lmt", "--timeout", "0"], tmp_path)
        assert res.returncode == 4
        assert res.stdout.startswith("status timeout")
