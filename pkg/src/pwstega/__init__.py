"""Password-keyed coverless image steganography with exactly invertible diffusion."""

__version__ = "0.1.0"
