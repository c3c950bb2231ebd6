"""Quantum convolutional network benchmark toolkit.

A self-contained dense state-vector simulator plus the model zoo,
encodings, classical pre-processing, training loop and reporting
needed to benchmark small quantum convolutional classifiers against
tiny classical CNNs on MNIST-style binary classification tasks.
"""

__version__ = "0.1.0"
