"""Test package for thermocline_twin."""
