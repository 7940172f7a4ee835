"""Integration tests for thermocline_twin."""
