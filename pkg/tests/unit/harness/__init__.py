"""Unit tests for the harness services."""
