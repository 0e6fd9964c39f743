"""From-scratch CNN-BiGRU intrusion-detection framework with a pluggable activation zoo."""

__version__ = "0.1.0"
