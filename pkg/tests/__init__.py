"""Unit tests for the valuation_lab package."""
