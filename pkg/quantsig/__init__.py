"""quantsig: technical-indicator price prediction and tweet sentiment classification."""

__version__ = "1.0.0"
