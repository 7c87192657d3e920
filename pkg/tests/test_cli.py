import subprocess
import sys

import numpy as np
import pytest

from recnn.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from recnn.dataio import LabelMap, write_labelmap

GEN = ["--images", "8", "--compositions", "2", "--classes", "4", "--size", "16x12", "--channels", "4", "--seed", "3"]


@pytest.fixture(scope="module")
def archive(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-synthetic", "--out", str(root / "data"), *GEN, "--noise", "0"]) == EXIT_OK
    assert main(["build-index", "--manifest", str(root / "data" / "manifest.jsonl"), "--out", str(root / "a.rix")]) == 0
    return root


def test_gen_prints_manifest_path(tmp_path, capsys):
    assert main(["gen-synthetic", "--out", str(tmp_path), *GEN]) == EXIT_OK
    assert capsys.readouterr().out.strip() == str(tmp_path / "manifest.jsonl")


def test_query_lines(archive, capsys):
    capsys.readouterr()
    code = main(["query", "--index", str(archive / "a.rix"), "--id", "img0003", "--scheme", "recnn+", "--top-k", "3"])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    # ids sharing the query's composition (odd indices) tie at 0 and sort by id
    assert lines == ["1,img0001,0.000000", "2,img0003,0.000000", "3,img0005,0.000000"]


def test_query_label_filter_and_topk_bigger_than_archive(archive, capsys):
    capsys.readouterr()
    args = ["query", "--index", str(archive / "a.rix"), "--id", "img0000", "--scheme", "recnn", "--top-k", "50"]
    assert main(args + ["--label-filter"]) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == 8  # compositions share classes here


def test_evaluate_files(archive, capsys):
    report, pr = archive / "r.csv", archive / "pr.csv"
    argv = ["evaluate", "--index", str(archive / "a.rix"), "--scheme", "recnn+", "--report", str(report), "--pr", str(pr)]
    assert main(argv) == EXIT_OK
    lines = report.read_text().splitlines()
    assert lines[0] == "scheme,anmrr,map,p5,p10,p20,p50"
    assert lines[1].startswith("recnn+,0.000000,1.000000,")
    pr_lines = pr.read_text().splitlines()
    assert pr_lines[0] == "recall,precision" and len(pr_lines) == 12
    assert pr_lines[1:] == [f"{r / 10:.1f},1.000000" for r in range(11)]
    assert capsys.readouterr().out.endswith(report.read_text())


def test_evaluate_custom_k(archive):
    report = archive / "k.csv"
    argv = ["evaluate", "--index", str(archive / "a.rix"), "--scheme", "stats", "--report", str(report)]
    assert main(argv + ["--pr", str(archive / "kpr.csv"), "--k", "1,4"]) == EXIT_OK
    assert report.read_text().splitlines() == ["scheme,anmrr,map,p1,p4", "stats,0.000000,1.000000,1.000000,1.000000"]


def test_outputs_are_reproducible(archive, tmp_path):
    manifest = archive / "data" / "manifest.jsonl"
    assert main(["build-index", "--manifest", str(manifest), "--out", str(tmp_path / "b.rix")]) == EXIT_OK
    assert (tmp_path / "b.rix").read_bytes() == (archive / "a.rix").read_bytes()
    outs = []
    for name in ("x", "y"):
        argv = ["evaluate", "--index", str(archive / "a.rix"), "--scheme", "glcm"]
        main(argv + ["--report", str(tmp_path / f"{name}.csv"), "--pr", str(tmp_path / f"{name}_pr.csv")])
        outs.append((tmp_path / f"{name}.csv").read_bytes() + (tmp_path / f"{name}_pr.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seg_metrics(tmp_path, capsys):
    gt = LabelMap(np.array([[0, 0, 0, 0], [1, 1, 1, 1]], np.uint8))
    pred = LabelMap(np.array([[0, 0, 0, 1], [1, 1, 1, 0]], np.uint8))
    write_labelmap(tmp_path / "gt.pgm", gt)
    write_labelmap(tmp_path / "pred.pgm", pred)
    assert main(["seg-metrics", "--pred", str(tmp_path / "gt.pgm"), "--gt", str(tmp_path / "gt.pgm"), "--classes", "2"]) == 0
    assert capsys.readouterr().out.splitlines() == ["pixel_acc,mean_acc,mean_iu", "1.000000,1.000000,1.000000"]
    main(["seg-metrics", "--pred", str(tmp_path / "pred.pgm"), "--gt", str(tmp_path / "gt.pgm"), "--classes", "2"])
    assert capsys.readouterr().out.splitlines()[1] == "0.750000,0.750000,0.600000"


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self, archive, capsys):
        assert main(["query", "--index", str(archive / "a.rix"), "--id", "x", "--scheme", "recnn", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_no_arguments(self):
        assert main([]) == EXIT_USAGE

    def test_bad_scheme(self, archive):
        assert main(["query", "--index", str(archive / "a.rix"), "--id", "img0000", "--scheme", "sift"]) == 1

    def test_missing_query_id(self, archive, capsys):
        capsys.readouterr()
        assert main(["query", "--index", str(archive / "a.rix"), "--id", "missing", "--scheme", "recnn"]) == EXIT_USAGE
        captured = capsys.readouterr()
        assert captured.out == "" and "missing" in captured.err

    def test_channels_below_classes(self, tmp_path):
        argv = ["gen-synthetic", "--out", str(tmp_path), "--classes", "8", "--channels", "4"]
        assert main(argv) == EXIT_USAGE
        assert not (tmp_path / "manifest.jsonl").exists()

    def test_unreadable_index(self, tmp_path, capsys):
        assert main(["query", "--index", str(tmp_path / "none.rix"), "--id", "a", "--scheme", "recnn"]) == EXIT_DATA
        (tmp_path / "bad.rix").write_bytes(b"NOPE" + bytes(12))
        assert main(["query", "--index", str(tmp_path / "bad.rix"), "--id", "a", "--scheme", "recnn"]) == EXIT_DATA
        assert "magic" in capsys.readouterr().err

    def test_missing_manifest(self, tmp_path):
        argv = ["build-index", "--manifest", str(tmp_path / "no.jsonl"), "--out", str(tmp_path / "o.rix")]
        assert main(argv) == EXIT_DATA

    def test_invalid_pgm(self, tmp_path, capsys):
        (tmp_path / "p.pgm").write_bytes(b"P5\n2 2\n255\n\x00")
        assert main(["seg-metrics", "--pred", str(tmp_path / "p.pgm"), "--gt", str(tmp_path / "p.pgm"), "--classes", "2"]) == 2
        assert "offset" in capsys.readouterr().err

    def test_label_out_of_vocabulary(self, tmp_path):
        write_labelmap(tmp_path / "l.pgm", LabelMap(np.array([[5]], np.uint8)))
        assert main(["seg-metrics", "--pred", str(tmp_path / "l.pgm"), "--gt", str(tmp_path / "l.pgm"), "--classes", "3"]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "recnn", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("recnn ")
    out = subprocess.run([sys.executable, "-m", "recnn", "query"], capture_output=True, text=True)
    assert out.returncode == 1 and "usage" in out.stderr
