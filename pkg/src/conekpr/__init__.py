"""conekpr: cone keypoint regression, stereo localization, and evaluation toolkit."""

__version__ = "0.1.0"
