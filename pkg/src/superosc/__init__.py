"""Superoscillation energy-bookkeeping laboratory."""
