"""Pydantic models shared by the services."""
