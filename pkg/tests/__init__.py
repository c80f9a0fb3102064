"""Test initialization."""
