import numpy as np
import pytest

from spdpool import cli
from spdpool.pooling import load_descriptor
from spdpool.smaid import read_pnm, write_pnm
from spdpool.spd import load_gram
from spdpool.learning import load_linear_map
from spdpool.trajectory import load_trajectory


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture()
def synth_dir(tmp_path):
    out = tmp_path / "data"
    assert run(
        "synth", "--classes", 3, "--channels", 6, "--pairs-per-class", 1,
        "--seq-len", 20, "--sequences-per-class", 5, "--seed", 9, "--out-dir", out,
    ) == 0
    return out


class TestArgHandling:
    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--help"])
        assert exc.value.code == 0
        assert "synth" in capsys.readouterr().out

    def test_subcommand_help_lists_defaults(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["pool", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "--gamma" in out and "default: 1.0" in out

    def test_unknown_flag_exits_two(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["synth", "--out-dir", str(tmp_path / "d"), "--bogus", "1"])
        assert exc.value.code == 2
        assert "--bogus" in capsys.readouterr().err

    def test_missing_input_is_runtime_error(self, tmp_path, capsys):
        code = run("pool", "--in", tmp_path / "nope.trj", "--out", tmp_path / "x.spd")
        assert code == 1
        assert capsys.readouterr().err.strip()

    def test_eval_without_mode_is_usage_error(self, tmp_path, capsys):
        labels = tmp_path / "labels.csv"
        labels.write_text("a,1\n")
        code = run("eval", "--labels", labels, "--out", tmp_path / "r.csv")
        assert code == 2


class TestPipelineStages:
    def test_synth_writes_dataset(self, synth_dir):
        files = sorted(synth_dir.glob("*.trj"))
        assert len(files) == 15
        assert (synth_dir / "labels.csv").exists()
        t = load_trajectory(files[0])
        assert t.values.shape == (6, 20)

    def test_pool_kcp_diagonal_is_frame_count(self, synth_dir, tmp_path):
        seq = sorted(synth_dir.glob("*.trj"))[0]
        out = tmp_path / "seq.spd"
        assert run("pool", "--method", "kcp", "--gamma", 1, "--in", seq, "--out", out) == 0
        desc = load_descriptor(out)
        assert np.abs(np.diag(desc.values) - 20.0).max() <= 1e-12 * 20

    def test_pool_directory_mode(self, synth_dir, tmp_path):
        out = tmp_path / "spd"
        assert run("pool", "--method", "tcp", "--scale", "by_n", "--in", synth_dir, "--out", out) == 0
        assert len(sorted(out.glob("*.spd"))) == 15

    def test_pool_normalize_and_weight(self, synth_dir, tmp_path):
        seq = sorted(synth_dir.glob("*.trj"))[0]
        out = tmp_path / "seq.spd"
        assert run(
            "pool", "--method", "tcp", "--normalize", "simplex", "--uniform-weights",
            "--in", seq, "--out", out,
        ) == 0
        desc = load_descriptor(out)
        assert desc.dim == 6
        # simplex columns sum to 1 and uniform weights scale by 1/n, so every
        # cross-product entry is bounded by 1/n^2 summed over n frames
        assert desc.values.max() <= 1.0 / 20 + 1e-12

    def test_pool_bkcp(self, synth_dir, tmp_path):
        seq = sorted(synth_dir.glob("*.trj"))[0]
        out = tmp_path / "seq.spd"
        assert run(
            "pool", "--method", "bkcp", "--block-len", 3, "--permutations", 2,
            "--perm-seed", 1, "--in", seq, "--out", out,
        ) == 0
        block = load_descriptor(out)
        assert block.block_dims() == (3, 3)

    def test_gram_and_ids(self, synth_dir, tmp_path):
        spd_dir = tmp_path / "spd"
        run("pool", "--method", "kcp", "--in", synth_dir, "--out", spd_dir)
        gram_path = tmp_path / "k.grm"
        ids_path = tmp_path / "ids.txt"
        assert run(
            "gram", "--in", spd_dir, "--out", gram_path, "--measure", "linear-logvec",
            "--ids-out", ids_path,
        ) == 0
        K = load_gram(gram_path)
        assert K.shape == (15, 15)
        ids = [l for l in ids_path.read_text().splitlines() if not l.startswith("#")]
        assert len(ids) == 15 and ids == sorted(ids)

    def test_gram_csv_has_config_header(self, synth_dir, tmp_path):
        spd_dir = tmp_path / "spd"
        run("pool", "--method", "kcp", "--in", synth_dir, "--out", spd_dir)
        gram_path = tmp_path / "k.csv"
        run("gram", "--in", spd_dir, "--out", gram_path, "--measure", "le")
        first = gram_path.read_text().splitlines()[0]
        assert first.startswith("# spdpool-config: gram")
        assert "--measure le" in first

    def test_train_predict_eval(self, synth_dir, tmp_path):
        spd_dir = tmp_path / "spd"
        run("pool", "--method", "kcp", "--in", synth_dir, "--out", spd_dir)
        gram_path = tmp_path / "k.grm"
        run("gram", "--in", spd_dir, "--out", gram_path, "--measure", "linear-logvec")
        model = tmp_path / "m.svm1"
        assert run(
            "train-svm", "--gram", gram_path, "--labels", synth_dir / "labels.csv",
            "--svm-c", 10, "--seed", 4, "--out", model,
        ) == 0
        pred = tmp_path / "p.csv"
        assert run("predict", "--model", model, "--gram", gram_path, "--out", pred) == 0
        report = tmp_path / "r.csv"
        report_txt = tmp_path / "r.txt"
        assert run(
            "eval", "--labels", synth_dir / "labels.csv", "--pred", pred,
            "--out", report, "--out-text", report_txt,
        ) == 0
        text = report_txt.read_text()
        assert "accuracy: 1.0000" in text

    def test_eval_kfold_mode(self, synth_dir, tmp_path):
        spd_dir = tmp_path / "spd"
        run("pool", "--method", "kcp", "--in", synth_dir, "--out", spd_dir)
        gram_path = tmp_path / "k.grm"
        run("gram", "--in", spd_dir, "--out", gram_path, "--measure", "linear-logvec")
        report = tmp_path / "r.csv"
        assert run(
            "eval", "--labels", synth_dir / "labels.csv", "--gram", gram_path,
            "--folds", 3, "--svm-c", 10, "--seed", 2, "--out", report,
        ) == 0
        lines = report.read_text().splitlines()
        assert lines[0].startswith("# spdpool-config: eval")
        assert lines[1].startswith("accuracy,")

    def test_train_e2e(self, synth_dir, tmp_path):
        out_map = tmp_path / "w.trj"
        out_trace = tmp_path / "trace.csv"
        assert run(
            "train-e2e", "--data-dir", synth_dir, "--loss", "frob", "--iters", 40,
            "--clip-len", 10, "--seed", 1, "--out-map", out_map, "--out-trace", out_trace,
        ) == 0
        lmap = load_linear_map(out_map)
        assert lmap.matrix.shape == (3, 6)
        lines = out_trace.read_text().splitlines()
        assert lines[0].startswith("# spdpool-config: train-e2e")
        assert lines[1] == "iteration,loss"
        assert len(lines) == 2 + 41

    def test_gradcheck(self, tmp_path, capsys):
        out = tmp_path / "g.csv"
        assert run(
            "gradcheck", "--loss", "jbld", "--M", 3, "--n", 8, "--seed", 5, "--out", out,
        ) == 0
        printed = capsys.readouterr().out
        assert "max relative error" in printed
        body = [l for l in out.read_text().splitlines() if l.startswith("max_relative_error")]
        assert float(body[0].split(",")[1]) < 1e-5


class TestImagePipeline:
    @pytest.fixture()
    def frames_dir(self, tmp_path):
        d = tmp_path / "frames"
        d.mkdir()
        rng = np.random.default_rng(0)
        for i in range(8):
            px = np.zeros((16, 16))
            px[4:9, i : i + 5] = 255.0
            write_pnm(px, d / f"f_{i:03d}.pgm")
        return d

    def test_smaid_export(self, frames_dir, tmp_path):
        out = tmp_path / "s.ppm"
        assert run(
            "smaid", "--frames-dir", frames_dir, "--zeta", 2, "--beta", 3,
            "--tau", 0, "--out", out,
        ) == 0
        rgb = read_pnm(out)
        assert rgb.shape == (16, 16, 3)

    def test_smaid_preset_overrides_zeta(self, frames_dir, tmp_path, capsys):
        # zeta15 needs 45 frames; only 8 exist, so the preset must fail
        code = run(
            "smaid", "--frames-dir", frames_dir, "--preset", "zeta15", "--out",
            tmp_path / "s.ppm",
        )
        assert code == 1

    def test_localize_writes_box(self, frames_dir, tmp_path):
        out = tmp_path / "box.csv"
        assert run("localize", "--frames-dir", frames_dir, "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# spdpool-config: localize")
        assert lines[1] == "x0,y0,x1,y1"
        x0, y0, x1, y1 = map(int, lines[2].split(","))
        assert 0 <= x0 <= x1 <= 15 and 0 <= y0 <= y1 <= 15


class TestDeterminism:
    def test_repeated_pipeline_is_byte_identical(self, tmp_path):
        def one_round(base):
            base.mkdir()
            data = base / "data"
            run("synth", "--classes", 2, "--channels", 4, "--pairs-per-class", 1,
                "--seq-len", 12, "--sequences-per-class", 4, "--seed", 7, "--out-dir", data)
            spd_dir = base / "spd"
            run("pool", "--method", "kcp", "--in", data, "--out", spd_dir)
            run("gram", "--in", spd_dir, "--out", base / "k.grm", "--measure", "le")
            run("train-svm", "--gram", base / "k.grm", "--labels", data / "labels.csv",
                "--svm-c", 5, "--seed", 1, "--out", base / "m.svm1")
            run("predict", "--model", base / "m.svm1", "--gram", base / "k.grm",
                "--out", base / "p.csv")

        one_round(tmp_path / "a")
        one_round(tmp_path / "b")
        for name in ("k.grm", "m.svm1", "p.csv"):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            # argv differ only in the base directory; strip it from CSV echoes
            if name.endswith(".csv"):
                a = a.replace(b"/a/", b"/_/")
                b = b.replace(b"/b/", b"/_/")
            assert a == b, name
