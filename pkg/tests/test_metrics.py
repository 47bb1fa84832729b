import math

import numpy as np
import pytest

from flowqa import metrics
from flowqa.errors import ProviderError, ShapeError, SizeError
from flowqa.flow import FlowField, estimate_flow, write_flo
from flowqa.media import VideoSequence, frame_from_rgb
from flowqa.metrics import (
    BuiltinFlowProvider,
    FloDirectoryProvider,
    MetricScore,
    psnr,
    score_video_flolpips,
    score_video_lpips,
    score_video_psnr,
    ssim,
)

from conftest import textured_rgb_frame, yuv_frame, yuv_sequence


class TestPsnr:
    def test_identical_frames_inf(self):
        f = yuv_frame(np.full((8, 8), 77.0))
        assert psnr(f, f) == math.inf

    def test_off_by_one_everywhere(self):
        a = yuv_frame(np.full((8, 8), 100.0))
        b = yuv_frame(np.full((8, 8), 101.0))
        assert psnr(a, b) == pytest.approx(10 * math.log10(255 ** 2),
                                           abs=1e-3)
        assert psnr(a, b) == pytest.approx(48.1308, abs=1e-3)

    def test_matches_mse_oracle(self):
        rng = np.random.default_rng(80)
        ya = np.floor(rng.uniform(0, 256, (12, 12)))
        yb = np.floor(rng.uniform(0, 256, (12, 12)))
        total = 0.0
        for y in range(12):
            for x in range(12):
                total += (ya[y, x] - yb[y, x]) ** 2
        mse = total / 144
        want = 10 * math.log10(255 ** 2 / mse)
        assert psnr(yuv_frame(ya), yuv_frame(yb)) == pytest.approx(
            want, abs=1e-6)

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            psnr(yuv_frame(np.zeros((8, 8))), yuv_frame(np.zeros((8, 10))))


def _ssim_oracle(x, y):
    """Literal sliding-window SSIM, one window at a time."""
    g1 = np.exp(-((np.arange(11) - 5.0) ** 2) / (2 * 1.5 ** 2))
    g = np.outer(g1, g1)
    g /= g.sum()
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    h, w = x.shape
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            wx = x[i:i + 11, j:j + 11]
            wy = y[i:i + 11, j:j + 11]
            mx = (g * wx).sum()
            my = (g * wy).sum()
            vx = (g * wx * wx).sum() - mx * mx
            vy = (g * wy * wy).sum() - my * my
            cov = (g * wx * wy).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cov + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


class TestSsim:
    def test_identical_frames(self):
        rng = np.random.default_rng(81)
        y = np.floor(rng.uniform(0, 256, (16, 16)))
        assert ssim(yuv_frame(y), yuv_frame(y)) == pytest.approx(1.0,
                                                                 abs=1e-9)

    def test_constant_images_closed_form(self):
        a = yuv_frame(np.full((16, 16), 100.0))
        b = yuv_frame(np.full((16, 16), 120.0))
        c1 = (0.01 * 255) ** 2
        want = (2 * 100 * 120 + c1) / (100 ** 2 + 120 ** 2 + c1)
        assert ssim(a, b) == pytest.approx(want, abs=1e-6)

    def test_matches_sliding_window_oracle(self):
        rng = np.random.default_rng(82)
        ya = np.floor(rng.uniform(0, 256, (32, 32)))
        yb = np.clip(ya + rng.normal(0, 12, (32, 32)), 0, 255)
        got = ssim(yuv_frame(ya), yuv_frame(yb))
        assert got == pytest.approx(_ssim_oracle(ya, yb), abs=1e-6)

    def test_too_small(self):
        with pytest.raises(SizeError):
            ssim(yuv_frame(np.zeros((8, 8))), yuv_frame(np.zeros((8, 8))))


def _rgb_sequence(frames):
    return VideoSequence(frames)


def _moving_sequence(rng, n=4, size=24):
    base = textured_rgb_frame(rng, size, size)
    arr = np.stack(base.channels, axis=2)
    frames = [frame_from_rgb(np.roll(arr, t, axis=1)) for t in range(n)]
    return _rgb_sequence(frames)


class TestMetricScore:
    def test_video_score_is_mean(self):
        score = MetricScore("psnr", [(0, 1.0), (1, 2.0), (2, 6.0)])
        assert score.video_score == pytest.approx(3.0, abs=1e-9)


class TestLpipsDriver:
    def test_identity(self, mini_archive):
        rng = np.random.default_rng(90)
        seq = _moving_sequence(rng)
        score = score_video_lpips(seq, seq, mini_archive)
        assert score.video_score == 0.0

    def test_single_frame(self, mini_archive):
        rng = np.random.default_rng(91)
        a = _rgb_sequence([textured_rgb_frame(rng, 24, 24)])
        b = _rgb_sequence([textured_rgb_frame(rng, 24, 24)])
        score = score_video_lpips(a, b, mini_archive)
        assert len(score.per_frame) == 1
        assert score.video_score == score.per_frame[0][1]

    def test_mean_of_frame_scores(self, mini_archive):
        rng = np.random.default_rng(92)
        a = _moving_sequence(rng, n=3)
        b = _moving_sequence(rng, n=3)
        score = score_video_lpips(a, b, mini_archive)
        values = [s for _, s in score.per_frame]
        assert score.video_score == pytest.approx(np.mean(values), abs=1e-9)
        singles = [
            score_video_lpips(_rgb_sequence([a.frames[t]]),
                              _rgb_sequence([b.frames[t]]),
                              mini_archive).video_score
            for t in range(3)
        ]
        np.testing.assert_allclose(values, singles, atol=1e-12)

    def test_length_mismatch(self, mini_archive):
        rng = np.random.default_rng(93)
        a = _moving_sequence(rng, n=3)
        b = _moving_sequence(rng, n=4)
        with pytest.raises(ShapeError):
            score_video_lpips(a, b, mini_archive)


class TestFloLpipsDriver:
    def test_identity_all_modes(self, mini_archive):
        rng = np.random.default_rng(94)
        seq = _moving_sequence(rng, n=4)
        for mode in metrics.WEIGHT_MODES:
            score = score_video_flolpips(seq, seq, mini_archive, mode=mode)
            assert score.video_score == 0.0
            assert len(score.per_frame) == 3

    def test_static_reduction_to_lpips(self, mini_archive):
        rng = np.random.default_rng(95)
        ref_frame = textured_rgb_frame(rng, 24, 24)
        dis_frame = textured_rgb_frame(rng, 24, 24)
        ref = _rgb_sequence([ref_frame] * 4)
        dis = _rgb_sequence([dis_frame] * 4)
        flo = score_video_flolpips(ref, dis, mini_archive)
        plain = score_video_lpips(ref, dis, mini_archive)
        tail = [s for t, s in plain.per_frame if t >= 1]
        assert flo.video_score == pytest.approx(np.mean(tail), abs=1e-6)

    def test_needs_two_frames(self, mini_archive):
        rng = np.random.default_rng(96)
        seq = _rgb_sequence([textured_rgb_frame(rng, 24, 24)])
        with pytest.raises(SizeError):
            score_video_flolpips(seq, seq, mini_archive)

    def test_parallel_matches_sequential(self, mini_archive):
        rng = np.random.default_rng(97)
        ref = _moving_sequence(rng, n=5)
        dis = _moving_sequence(rng, n=5)
        seq_score = score_video_flolpips(ref, dis, mini_archive, workers=1)
        par_score = score_video_flolpips(ref, dis, mini_archive, workers=4)
        assert seq_score.video_score == par_score.video_score
        assert seq_score.per_frame == par_score.per_frame

    def test_flo_directory_provider(self, mini_archive, tmp_path):
        rng = np.random.default_rng(98)
        ref = _moving_sequence(rng, n=3)
        dis = _moving_sequence(rng, n=3)
        for t in (1, 2):
            ref_field = estimate_flow(ref.frames[t - 1], ref.frames[t])
            write_flo(ref_field, tmp_path / f"ref_{t:06d}.flo")
            write_flo(ref_field, tmp_path / f"dis_{t:06d}.flo")
        provider = FloDirectoryProvider(tmp_path)
        score = score_video_flolpips(ref, dis, mini_archive, provider)
        assert score.video_score >= 0.0

    def test_missing_flo_names_index(self, mini_archive, tmp_path):
        rng = np.random.default_rng(99)
        ref = _moving_sequence(rng, n=3)
        provider = FloDirectoryProvider(tmp_path)
        with pytest.raises(ProviderError, match="index 1"):
            score_video_flolpips(ref, ref, mini_archive, provider)

    def test_provider_flow_size_checked(self, mini_archive):
        rng = np.random.default_rng(59)
        ref = _moving_sequence(rng, n=3)

        class Bad:
            def pair_flows(self, *args):
                f = FlowField(np.zeros((4, 4)), np.zeros((4, 4)))
                return f, f

        with pytest.raises(ShapeError):
            score_video_flolpips(ref, ref, mini_archive, Bad())


class TestVideoPsnr:
    def test_per_frame_rows(self):
        rng = np.random.default_rng(58)
        lumas = [np.floor(rng.uniform(0, 256, (8, 8))) for _ in range(3)]
        ref = yuv_sequence(lumas)
        dis = yuv_sequence([np.clip(y + 1, 0, 255) for y in lumas])
        score = score_video_psnr(ref, dis)
        assert [t for t, _ in score.per_frame] == [0, 1, 2]
        assert score.metric_id == "psnr"
