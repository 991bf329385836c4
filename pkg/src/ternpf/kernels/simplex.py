"""Euclidean projection onto the Gibbs simplex {phi >= 0, sum phi = 1}."""
import numpy as np
from numba import njit

# vectors within this distance of sum 1 (and non-negative) count as feasible
FEASIBLE_TOL = 4e-16


class NumericalFault(FloatingPointError):
    def __init__(self, message, cell=None, step=None):
        super().__init__(message)
        self.cell = cell
        self.step = step


@njit(cache=True, nogil=True)
def project_simplex_nb(x, out, u):
    """Sort-based projection for short vectors; ``u`` is scratch, ``out`` may alias ``x``."""
    n = x.shape[0]
    s = 0.0
    feasible = True
    for a in range(n):
        s += x[a]
        if x[a] < 0.0:
            feasible = False
    if feasible and abs(s - 1.0) <= FEASIBLE_TOL:
        for a in range(n):
            out[a] = x[a]
        return
    # insertion sort, descending, on a copy
    for a in range(n):
        u[a] = x[a]
    for a in range(1, n):
        v = u[a]
        b = a - 1
        while b >= 0 and u[b] < v:
            u[b + 1] = u[b]
            b -= 1
        u[b + 1] = v
    cs = 0.0
    theta = 0.0
    for j in range(n):
        cs += u[j]
        t = (cs - 1.0) / (j + 1)
        if u[j] - t > 0.0:
            theta = t
    for a in range(n):
        v = x[a] - theta
        out[a] = v if v > 0.0 else 0.0


@njit(cache=True, nogil=True)
def project4_nb(x0, x1, x2, x3):
    """Scalar four-phase projection; same arithmetic as :func:`project_simplex_nb`."""
    s = ((x0 + x1) + x2) + x3
    if x0 >= 0.0 and x1 >= 0.0 and x2 >= 0.0 and x3 >= 0.0 and abs(s - 1.0) <= FEASIBLE_TOL:
        return x0, x1, x2, x3
    # descending sorting network
    a, b, c, d = x0, x1, x2, x3
    if a < b:
        a, b = b, a
    if c < d:
        c, d = d, c
    if a < c:
        a, c = c, a
    if b < d:
        b, d = d, b
    if b < c:
        b, c = c, b
    theta = a - 1.0
    cs = a + b
    t = (cs - 1.0) / 2
    if b - t > 0.0:
        theta = t
    cs += c
    t = (cs - 1.0) / 3
    if c - t > 0.0:
        theta = t
    cs += d
    t = (cs - 1.0) / 4
    if d - t > 0.0:
        theta = t
    return max(x0 - theta, 0.0), max(x1 - theta, 0.0), max(x2 - theta, 0.0), max(x3 - theta, 0.0)


def project_simplex(phi_raw, cell=None) -> np.ndarray:
    x = np.asarray(phi_raw, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericalFault(f"non-finite phase vector {x.tolist()}", cell=cell)
    out = np.empty_like(x)
    project_simplex_nb(x, out, np.empty_like(x))
    return out
