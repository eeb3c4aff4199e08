"""riskforge: interpretable multimodal mortality-risk modeling over CSV tables."""

__version__ = "0.1.0"
