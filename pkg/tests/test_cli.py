import numpy as np
import pytest

from flowqa import cli, media
from flowqa.container import write_container
from flowqa.flow import read_flo

from conftest import mini_trunk, textured, yuv_sequence


@pytest.fixture
def archive_path(tmp_path):
    entries, manifest = mini_trunk(np.random.default_rng(7))
    path = tmp_path / "weights.flpw"
    write_container(path, entries, manifest)
    return str(path)


def _write_clip(tmp_path, name, lumas):
    path = tmp_path / name
    media.write_y4m(yuv_sequence(lumas), path)
    return str(path)


@pytest.fixture
def clip_pair(tmp_path):
    rng = np.random.default_rng(42)
    lumas = [np.floor(255 * textured(rng, 16, 16)) for _ in range(3)]
    ref = _write_clip(tmp_path, "ref.y4m", lumas)
    noisy = [np.clip(y + rng.integers(-6, 7, y.shape), 0, 255)
             for y in lumas]
    dis = _write_clip(tmp_path, "dis.y4m", noisy)
    return ref, dis


class TestScore:
    def test_flolpips_identity_is_zero(self, clip_pair, archive_path,
                                       tmp_path, capsys):
        ref, _ = clip_pair
        out = tmp_path / "scores.csv"
        code = cli.run(["score", "--ref", ref, "--dis", ref,
                        "--metric", "flolpips", "--weights", archive_path,
                        "--out", str(out)])
        assert code == 0
        assert "video_score 0.0" in capsys.readouterr().out
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "frame_index,score"
        assert lines[-1] == "video,0.0"

    def test_psnr_identical_is_inf(self, clip_pair, tmp_path, capsys):
        ref, _ = clip_pair
        out = tmp_path / "psnr.csv"
        code = cli.run(["score", "--ref", ref, "--dis", ref,
                        "--metric", "psnr", "--out", str(out)])
        assert code == 0
        assert "inf" in out.read_text()

    def test_deterministic_output_independent_of_workers(
            self, clip_pair, archive_path, tmp_path):
        ref, dis = clip_pair
        outs = []
        for workers, name in ((1, "a.csv"), (4, "b.csv")):
            out = tmp_path / name
            code = cli.run(["score", "--ref", ref, "--dis", dis,
                            "--metric", "flolpips", "--weights",
                            archive_path, "--out", str(out),
                            "--workers", str(workers)])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_weights_env_var(self, clip_pair, archive_path, monkeypatch,
                             capsys):
        ref, dis = clip_pair
        monkeypatch.setenv(cli.WEIGHTS_ENV, archive_path)
        assert cli.run(["score", "--ref", ref, "--dis", dis,
                        "--metric", "lpips"]) == 0

    def test_missing_weights_is_usage_error(self, clip_pair, monkeypatch,
                                            capsys):
        ref, dis = clip_pair
        monkeypatch.delenv(cli.WEIGHTS_ENV, raising=False)
        assert cli.run(["score", "--ref", ref, "--dis", dis,
                        "--metric", "lpips"]) == 1

    def test_missing_input_is_io_error(self, archive_path, capsys):
        assert cli.run(["score", "--ref", "nope.y4m", "--dis", "nope.y4m",
                        "--metric", "psnr"]) == 2

    def test_mismatched_sizes_is_compute_error(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        a = _write_clip(tmp_path, "a.y4m",
                        [np.floor(255 * textured(rng, 16, 16))])
        b = _write_clip(tmp_path, "b.y4m",
                        [np.floor(255 * textured(rng, 12, 12))])
        assert cli.run(["score", "--ref", a, "--dis", b,
                        "--metric", "psnr"]) == 3


class TestSynthesize:
    def test_repeat(self, clip_pair, tmp_path, capsys):
        ref, _ = clip_pair
        out = tmp_path / "rep.y4m"
        assert cli.run(["synthesize", "--in", ref, "--method", "repeat",
                        "--factor", "2", "--out", str(out)]) == 0
        seq = media.read_y4m(out)
        assert len(seq) == 6

    def test_average(self, clip_pair, tmp_path):
        ref, _ = clip_pair
        out = tmp_path / "avg.y4m"
        assert cli.run(["synthesize", "--in", ref, "--method", "average",
                        "--out", str(out)]) == 0
        assert len(media.read_y4m(out)) == 5


class TestEvaluate:
    def test_end_to_end(self, tmp_path, archive_path, capsys):
        rng = np.random.default_rng(77)
        rows = []
        for i in range(6):
            lumas = [np.floor(255 * textured(rng, 16, 16))
                     for _ in range(2)]
            ref = _write_clip(tmp_path, f"r{i}.y4m", lumas)
            noise = rng.integers(-3 * (i + 1), 3 * (i + 1) + 1, (16, 16))
            dis = _write_clip(
                tmp_path, f"d{i}.y4m",
                [np.clip(y + noise, 0, 255) for y in lumas])
            rows.append((f"r{i}.y4m", f"d{i}.y4m", 10.0 + 12.0 * i))
        manifest = tmp_path / "manifest.csv"
        manifest.write_text(
            "ref,dis,dmos\n"
            + "".join(f"{r},{d},{m}\n" for r, d, m in rows))
        out = tmp_path / "report.csv"
        code = cli.run(["evaluate", "--manifest", str(manifest),
                        "--metric", "psnr", "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "plcc" in text and "srocc" in text and "rmse" in text
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "ref,dis,dmos,score,fitted,residual"
        assert len(lines) == 7


class TestFtest:
    def test_prints_verdict(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        rng = np.random.default_rng(5)
        a.write_text("residual\n" + "\n".join(
            str(v) for v in rng.normal(0, 0.01, 20)))
        b.write_text("\n".join(str(v) for v in rng.normal(0, 10.0, 20)))
        assert cli.run(["ftest", "--residuals-a", str(a),
                        "--residuals-b", str(b)]) == 0
        assert capsys.readouterr().out.strip() == "1"


class TestFlowCommand:
    def test_writes_flo(self, tmp_path, capsys):
        rng = np.random.default_rng(31)
        img = textured(rng, 48, 48)
        prev = tmp_path / "prev.ppm"
        next_ = tmp_path / "next.ppm"
        media.write_ppm(media.frame_from_rgb(np.stack([img] * 3, axis=2)),
                        prev)
        media.write_ppm(media.frame_from_rgb(
            np.stack([np.roll(img, 2, axis=1)] * 3, axis=2)), next_)
        out = tmp_path / "flow.flo"
        assert cli.run(["flow", "--prev", str(prev), "--next", str(next_),
                        "--out", str(out)]) == 0
        field = read_flo(out)
        assert field.shape == (48, 48)
        assert abs(np.median(field.u) - 2.0) < 0.5


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert cli.run(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand(self, capsys):
        assert cli.run([]) == 1

    @pytest.mark.parametrize("cmd", ["score", "synthesize", "evaluate",
                                     "ftest", "flow"])
    def test_help_exits_zero(self, cmd, capsys):
        assert cli.run([cmd, "--help"]) == 0
        assert "usage" in capsys.readouterr().out.lower()

    def test_top_level_help(self, capsys):
        assert cli.run(["--help"]) == 0
