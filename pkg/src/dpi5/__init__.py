"""Discrete phase integral (WKB) analysis of five-term recursions."""

__version__ = "0.1.0"
