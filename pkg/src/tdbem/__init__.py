"""Time-domain acoustic boundary elements with variable-step convolution
quadrature and frequency-axis cross compression."""

__version__ = "0.1.0"
