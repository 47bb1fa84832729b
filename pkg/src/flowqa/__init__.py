"""flowqa: full-reference video quality assessment for frame-interpolated content.

The headline metric pools perceptual feature differences with a spatial
weight map derived from the discrepancy between reference and distorted
optical flow fields; classic PSNR/SSIM baselines, trivial interpolation
distortion generators and a correlation/F-test evaluation harness round
out the toolkit.
"""

from flowqa._accel import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
