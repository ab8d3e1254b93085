"""Transverse sets in G x H over F_p and the bilinear varieties inside them."""

__version__ = "0.1.0"
