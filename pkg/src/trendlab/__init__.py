"""trendlab: simulate labeled trending time series and benchmark trend classifiers."""

__version__ = "0.1.0"
