"""Dense-coding based two-way QKD with qudits: key-rate bounds and experiments."""

__version__ = "0.1.0"
