"""Independent reference computations used by the tests.

Nothing here imports the quadrature or sampling code under test.
"""

import numpy as np


def trapezoid_example2(x, panels=10**6):
    """Composite trapezoid rule for the integral of 3 + cos(s^3) over [0, |x|]."""
    a = abs(float(x))
    s = np.linspace(0.0, a, panels + 1)
    f = 3.0 + np.cos(s**3)
    h = a / panels
    return float(h * (np.sum(f) - 0.5 * (f[0] + f[-1])))


def central_difference(func, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (func(x + e) - func(x - e)) / (2.0 * h)
    return g
