"""Discrete model manifolds, Kato-type curvature constants and numerical
checks of heat-kernel, eigenvalue and Harnack estimates."""
__version__ = "0.1.0"
