"""Multi-graph decoding toolkit: WFST algebra, n-gram LMs, decoding graphs,
a beam-search decoder with synthetic acoustics, rescoring and WER reporting."""

__version__ = "0.1.0"

FORMAT_VERSION = "1"
