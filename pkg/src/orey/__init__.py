"""Second-order quadratic variations of Gaussian processes and Orey index inference."""

__version__ = "0.1.0"
