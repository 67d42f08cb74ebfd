"""pivotlab: measurement engine for research pivots in bibliographic corpora."""

__version__ = "0.1.0"
