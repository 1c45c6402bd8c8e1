"""Index theory of symplectic differential systems, numerically."""
