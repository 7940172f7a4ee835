"""Unit tests for the thermosim services."""
