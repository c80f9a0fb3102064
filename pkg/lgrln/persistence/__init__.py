"""Persistence package: datasets, checkpoints and synthetic data."""
