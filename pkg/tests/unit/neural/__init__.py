"""Unit tests for the neural services."""
