"""Data-driven repair of student programs from statement-level fragments."""

__version__ = "0.1.0"
