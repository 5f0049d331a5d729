"""Edge-cloud collaborative CNN inference toolkit.

Pipeline: prune a model with a DDPG-driven channel-pruning search,
profile per-layer latency on both hosts, pick the latency-minimal
split point, then run the two halves across a TCP link.
"""

__version__ = "0.1.0"
