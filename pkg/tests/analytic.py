"""Closed-form auxiliary functions for x' = x^2 used as certificate fixtures."""
import math

import numpy as np


def bump(s):
    """Smooth bump: exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside."""
    return math.exp(1.0 - 1.0 / (1.0 - s * s)) if abs(s) < 1.0 else 0.0


def moving_bump_v(x0):
    """V(t, x) = bump(x / beta(t)) for x <= 0 and 1 for x > 0, beta the solution from x0 < 0."""
    def V(t, x):
        x = float(np.ravel(x)[0])
        if x > 0:
            return 1.0
        beta = x0 / (1.0 - x0 * t)
        return bump(x / beta)

    return V


def plateau_v(t, x):
    """1 for x <= 1/2, then the observable 4x/(1+4x^2) itself."""
    x = float(np.ravel(x)[0])
    return 1.0 if x <= 0.5 else 4 * x / (1 + 4 * x * x)
