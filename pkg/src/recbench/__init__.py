"""recbench: a desk-scale recommender benchmarking engine."""

__version__ = "0.1.0"
