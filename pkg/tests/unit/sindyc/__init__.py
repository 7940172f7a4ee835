"""Unit tests for the sindyc services."""
