"""Unit tests for the data services."""
