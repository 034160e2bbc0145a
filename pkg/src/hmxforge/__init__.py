"""Search-based unit-test generation with hybrid multi-level crossover."""

__version__ = "0.1.0"
