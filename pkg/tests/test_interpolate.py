from fractions import Fraction

import numpy as np
import pytest

from flowqa.errors import SizeError
from flowqa.interpolate import frame_average_upsample, frame_repeat_upsample
from flowqa.media import VideoSequence

from conftest import yuv_frame, yuv_sequence


def _planes_equal(a, b):
    return all(np.array_equal(pa, pb) for pa, pb in zip(a.channels,
                                                        b.channels))


class TestRepeat:
    def test_two_frames_factor_two(self):
        rng = np.random.default_rng(1)
        seq = yuv_sequence([np.floor(rng.uniform(0, 256, (4, 4)))
                            for _ in range(2)])
        out = frame_repeat_upsample(seq, 2)
        assert len(out) == 4
        assert _planes_equal(out.frames[0], seq.frames[0])
        assert _planes_equal(out.frames[1], seq.frames[0])
        assert _planes_equal(out.frames[2], seq.frames[1])
        assert out.frame_rate == Fraction(60, 1)

    def test_single_frame_factor_three(self):
        seq = yuv_sequence([np.zeros((4, 4))])
        out = frame_repeat_upsample(seq, 3)
        assert len(out) == 3

    def test_odd_indices_repeat_predecessor(self):
        rng = np.random.default_rng(2)
        seq = yuv_sequence([np.floor(rng.uniform(0, 256, (4, 4)))
                            for _ in range(3)])
        out = frame_repeat_upsample(seq, 2)
        assert len(out) == 6
        for i in (1, 3, 5):
            assert _planes_equal(out.frames[i], out.frames[i - 1])

    def test_downsample_recovers_input(self):
        rng = np.random.default_rng(3)
        seq = yuv_sequence([np.floor(rng.uniform(0, 256, (6, 4)))
                            for _ in range(4)])
        out = frame_repeat_upsample(seq, 3)
        for i, frame in enumerate(seq.frames):
            assert _planes_equal(out.frames[3 * i], frame)

    def test_factor_below_two(self):
        seq = yuv_sequence([np.zeros((4, 4))])
        with pytest.raises(ValueError):
            frame_repeat_upsample(seq, 1)


class TestAverage:
    def test_black_white_midpoint(self):
        seq = yuv_sequence([np.full((4, 4), 0.0), np.full((4, 4), 255.0)])
        out = frame_average_upsample(seq)
        assert len(out) == 3
        np.testing.assert_allclose(out.frames[1].channels[0], 127.5)
        assert out.frame_rate == Fraction(60, 1)

    def test_identical_frames(self):
        rng = np.random.default_rng(4)
        y = np.floor(rng.uniform(0, 256, (4, 4)))
        seq = yuv_sequence([y, y.copy()])
        out = frame_average_upsample(seq)
        assert len(out) == 3
        for frame in out.frames:
            assert _planes_equal(frame, seq.frames[0])

    def test_three_frame_structure(self):
        rng = np.random.default_rng(5)
        lumas = [np.floor(rng.uniform(0, 256, (4, 4))) for _ in range(3)]
        seq = yuv_sequence(lumas)
        out = frame_average_upsample(seq)
        assert len(out) == 5
        for i, frame in enumerate(seq.frames):
            assert _planes_equal(out.frames[2 * i], frame)
        np.testing.assert_allclose(
            out.frames[1].channels[0], (lumas[0] + lumas[1]) / 2)
        np.testing.assert_allclose(
            out.frames[3].channels[0], (lumas[1] + lumas[2]) / 2)

    def test_needs_two_frames(self):
        with pytest.raises(SizeError):
            frame_average_upsample(yuv_sequence([np.zeros((4, 4))]))

    def test_only_factor_two(self):
        seq = yuv_sequence([np.zeros((4, 4)), np.zeros((4, 4))])
        with pytest.raises(ValueError):
            frame_average_upsample(seq, factor=3)

    def test_preserves_dimensions_and_colorspace(self):
        from flowqa.media import frame_from_rgb
        rng = np.random.default_rng(6)
        frames = [frame_from_rgb(rng.uniform(0, 1, (6, 8, 3)))
                  for _ in range(2)]
        out = frame_average_upsample(VideoSequence(frames))
        assert out.frames[1].size == (8, 6)
        assert out.colorspace == frames[0].colorspace
