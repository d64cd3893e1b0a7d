import hashlib
import re
import subprocess
import sys

import numpy as np
import pytest

from rsvdkit import bench, dmat
from rsvdkit.cli import Bench, Gen, Pca, Rsvd, Svd, UsageError, main, parse_args
from rsvdkit.synth import FastDecay, spectrum


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_parse_gen():
    cmd = parse_args("gen --rows 100 --cols 80 --spectrum fast --seed 1 --out a.dmat".split())
    assert isinstance(cmd, Gen)
    assert (cmd.spec.rows, cmd.spec.cols, cmd.spec.seed, cmd.out) == (100, 80, 1, "a.dmat")
    assert cmd.spec.kind == FastDecay()


def test_parse_sharp_breakout_from_k():
    cmd = parse_args("gen --rows 10 --cols 10 --spectrum sharp --k 4 --out a".split())
    assert cmd.spec.kind.beta == 5.0
    with pytest.raises(UsageError, match="--beta"):
        parse_args("gen --rows 10 --cols 10 --spectrum sharp --out a".split())


def test_parse_other_commands():
    assert isinstance(parse_args(["svd", "a.dmat", "--out", "p"]), Svd)
    r = parse_args("rsvd a.dmat --k 3 --power-q 4 --seed 9 --values-only --out p".split())
    assert isinstance(r, Rsvd) and r.values_only and r.cfg.k == 3 and r.cfg.power_q == 4 and r.cfg.seed == 9
    p = parse_args("pca x.dmat --k-frac 0.1 --out p".split())
    assert isinstance(p, Pca) and p.k_frac == 0.1
    b = parse_args("bench fast-small --reps 3 --cols 100 200 --csv out.csv --threads 2".split())
    assert isinstance(b, Bench) and b.overrides == {"cols": [100, 200]} and b.threads == 2


@pytest.mark.parametrize(
    "argv,pattern",
    [
        ("rsvd a --k 0 --out p", r"--k: must be >= 1"),
        ("rsvd a --k two --out p", r"--k: invalid integer"),
        ("rsvd a --k 2 --epsilon abc --out p", r"--epsilon: invalid number"),
        ("rsvd a --k 2 --bogus --out p", r"unrecognized arguments: --bogus"),
        ("rsvd a --k 2", r"required: --out"),
        ("rsvd a --out p", r"one of the arguments --k --k-frac is required"),
        ("gen --rows 5 --cols 6 --spectrum fast --out a", r"--rows"),
        ("rsvd a --k 2 --epsilon 1.5 --out p", r"epsilon"),
        ("frobnicate", r"invalid choice"),
    ],
)
def test_usage_errors(argv, pattern, capsys):
    assert main(argv.split()) == 1
    assert re.search(pattern, capsys.readouterr().err)


def test_gen_svd_round_trip(tmp_path, capsys):
    a = tmp_path / "a.dmat"
    assert main(["gen", "--rows", "60", "--cols", "40", "--spectrum", "fast", "--seed", "3", "--out", str(a)]) == 0
    assert main(["svd", str(a), "--out", str(tmp_path / "f")]) == 0
    sigma = dmat.read_dmat(tmp_path / "f.sigma.dmat")[:, 0]
    np.testing.assert_allclose(sigma, spectrum(FastDecay(), 40), rtol=1e-11)
    u = dmat.read_dmat(tmp_path / "f.u.dmat")
    v = dmat.read_dmat(tmp_path / "f.v.dmat")
    assert u.shape == (60, 40) and v.shape == (40, 40)
    assert "seed=3" in capsys.readouterr().err


def test_rsvd_k_fraction(tmp_path, capsys):
    a = tmp_path / "a.dmat"
    main(["gen", "--rows", "120", "--cols", "100", "--spectrum", "slow", "--out", str(a)])
    assert main(["rsvd", str(a), "--k-frac", "0.05", "--seed", "4", "--out", str(tmp_path / "r")]) == 0
    assert dmat.read_dmat(tmp_path / "r.sigma.dmat").shape == (5, 1)
    assert dmat.read_dmat(tmp_path / "r.u.dmat").shape == (120, 5)
    assert dmat.read_dmat(tmp_path / "r.v.dmat").shape == (100, 5)
    err = capsys.readouterr().err.splitlines()[-1]
    for item in ("120x100", "k=5", "s=15", "q=2", "seed=4", "residual=", "time="):
        assert item in err


def test_rsvd_values_only_writes_sigma(tmp_path):
    a = tmp_path / "a.dmat"
    main(["gen", "--rows", "50", "--cols", "30", "--spectrum", "fast", "--out", str(a)])
    assert main(["rsvd", str(a), "--k", "4", "--values-only", "--out", str(tmp_path / "v")]) == 0
    assert main(["rsvd", str(a), "--k", "4", "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "v.sigma.dmat").read_bytes() == (tmp_path / "f.sigma.dmat").read_bytes()
    assert not (tmp_path / "v.u.dmat").exists()


def test_rsvd_k_too_large(tmp_path):
    a = tmp_path / "a.dmat"
    dmat.write_dmat(a, np.ones((4, 3)))
    assert main(["rsvd", str(a), "--k", "4", "--out", str(tmp_path / "r")]) == 1


def test_rsvd_reruns_are_byte_identical(tmp_path):
    a = tmp_path / "a.dmat"
    main(["gen", "--rows", "80", "--cols", "60", "--spectrum", "sharp", "--beta", "6", "--seed", "2", "--out", str(a)])
    for run in ("x", "y"):
        main(["rsvd", str(a), "--k", "5", "--seed", "7", "--out", str(tmp_path / run)])
    for part in ("u", "sigma", "v"):
        assert digest(tmp_path / f"x.{part}.dmat") == digest(tmp_path / f"y.{part}.dmat")


def test_pca_outputs(tmp_path):
    x = np.random.default_rng(0).standard_normal((40, 6)) * 0.5 ** np.arange(6)
    src = tmp_path / "x.dmat"
    dmat.write_dmat(src, x)
    assert main(["pca", str(src), "--k", "2", "--seed", "5", "--out", str(tmp_path / "p")]) == 0
    assert dmat.read_dmat(tmp_path / "p.components.dmat").shape == (6, 2)
    assert dmat.read_dmat(tmp_path / "p.mean.dmat").shape == (1, 6)
    var = dmat.read_dmat(tmp_path / "p.variance.dmat")[:, 0]
    lines = (tmp_path / "p.pca.txt").read_text().splitlines()
    assert lines[:5] == ["k 2", "N 40", "d 6", "seed 5", "explained_variance"]
    assert [float(v) for v in lines[5:]] == var.tolist()


def test_corrupt_input_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.dmat"
    bad.write_bytes(dmat.encode(np.ones((3, 3)))[:40])
    assert main(["svd", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "bad.dmat" in err and "byte offset 40" in err

    bad.write_bytes(b"XMAT1\n" + bytes(16))
    assert main(["svd", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "byte offset 0" in capsys.readouterr().err


def test_missing_input_exit_2(tmp_path):
    assert main(["svd", str(tmp_path / "nope.dmat"), "--out", str(tmp_path / "o")]) == 2


def test_non_finite_input_exit_3(tmp_path):
    a = tmp_path / "nan.dmat"
    a.write_bytes(dmat.encode(np.array([[1.0, np.nan]])))
    assert main(["svd", str(a), "--out", str(tmp_path / "o")]) == 3


def test_bench_fast_small(tmp_path):
    csv_path = tmp_path / "b.csv"
    assert main(["bench", "fast-small", "--reps", "2", "--csv", str(csv_path)]) == 0
    with open(csv_path, newline="") as fh:
        rows = bench.read_csv(fh)
    assert len(rows) == 12
    assert all(r.max_rel_err <= 1e-8 for r in rows)
    meta = (tmp_path / "b.csv.meta.json").read_text()
    assert '"seed": 0' in meta and '"threads": 1' in meta


def test_bench_to_stdout(capsys):
    assert main(["bench", "slow-small", "--reps", "1", "--cols", "50", "--rows", "60", "--k-frac", "0.1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith(",".join(bench.CSV_COLUMNS) + "\n")
    assert len(out.splitlines()) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rsvdkit", "rsvd", "x", "--k", "0", "--out", "p"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "--k" in proc.stderr
