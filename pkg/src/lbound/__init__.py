"""Lower-bound latency benchmarking and analysis for DL model graphs."""

__version__ = "0.1.0"
