"""Unit tests for the mvg services."""
