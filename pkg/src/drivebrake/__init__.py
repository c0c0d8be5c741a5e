"""Drive/brake reaction-diffusion toolkit."""

__version__ = "0.1.0"
