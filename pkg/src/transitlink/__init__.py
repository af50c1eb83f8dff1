"""Monthly transport-network snapshots, edge labeling, topological features,
from-scratch classifiers, and the experiment protocols tying them together."""

__version__ = "0.1.0"
