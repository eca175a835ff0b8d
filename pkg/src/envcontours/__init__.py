"""Multivariate extreme-value modelling and environmental contours.

Fits peaks-over-threshold margins and five joint-tail dependence models to
concomitant metocean series, builds physical-space contours from Monte Carlo
samples, and evaluates a mooring-line tension meta-model on the contour.
"""

__version__ = "0.1.0"
