"""Objective, optimizer, training loop and cross-validation."""
