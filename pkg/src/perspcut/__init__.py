"""LP-based branch-and-cut with generalized perspective cuts for semi-continuous MINLPs."""

__version__ = "0.1.0"
