"""Services implementing the toolkit operations."""
