"""Rewrite-rule-driven partial evaluator for a simply typed object language."""

__version__ = "0.1.0"
