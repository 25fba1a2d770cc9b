"""Shared data fields and small oracles for the test suite."""

import numpy as np


def zero(pts):
    return np.zeros(len(pts))


def linear_x1(pts):
    return pts[:, 0]


def quadratic_r2(pts):
    return np.sum(pts ** 2, axis=1)


def bump(pts):
    return 0.3 * (1.0 - np.sum(pts ** 2, axis=1)) ** 2


def linear_plus_bump(pts):
    return pts[:, 0] + 0.5 * (1.0 - np.sum(pts ** 2, axis=1)) ** 2


def observed_orders(residuals):
    """Successive halving orders; infinite when both residuals are roundoff."""
    out = []
    for a, b in zip(residuals, residuals[1:]):
        if a < 1e-12 and b < 1e-12:
            out.append(np.inf)
        else:
            out.append(np.log2(a / b))
    return out


def fd_gradient(f, pts, step=1e-6):
    """Central-difference gradient of a scalar point function."""
    pts = np.asarray(pts, dtype=float)
    n, dim = pts.shape
    g = np.empty((n, dim))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = step
        g[:, k] = (f(pts + e) - f(pts - e)) / (2 * step)
    return g


def fd_laplacian(f, pts, step):
    """Five/seven-point Laplacian of a scalar point function at spacing step."""
    pts = np.asarray(pts, dtype=float)
    n, dim = pts.shape
    out = -2.0 * dim * f(pts)
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = step
        out = out + f(pts + e) + f(pts - e)
    return out / step ** 2
