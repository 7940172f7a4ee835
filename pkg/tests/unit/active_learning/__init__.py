"""Unit tests for the active learning services."""
