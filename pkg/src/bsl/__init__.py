"""bsl: block-sparse greedy recovery, coherence metrics and performance guarantees."""

__version__ = "0.1.0"
