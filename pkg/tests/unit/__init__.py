"""Unit tests for thermocline_twin."""
