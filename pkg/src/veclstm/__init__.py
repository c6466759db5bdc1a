"""GPS trajectory activity recognition toolkit.

Ingests GeoLife-format trajectory archives, vectorizes them into grid
heatmaps, trains from-scratch LSTM / hybrid LSTM-CNN classifiers, and
benchmarks vectorized against non-vectorized training pipelines.
"""

__version__ = "0.1.0"
