"""Detect MEV transactions from ERC-20/ERC-721 transfer logs."""

__version__ = "0.1.0"
