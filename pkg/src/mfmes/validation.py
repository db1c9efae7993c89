"""Input validation helpers.

Conventions used throughout the package:

* inputs ``x`` are 2-d float arrays of shape ``(n, d)``;
* fidelity levels ``m`` are 1-based integers in ``1..M`` (``M`` is the target);
* a combined design matrix ``X`` carries the fidelity as a trailing column,
  so estimators compose with standard (X, y) tooling.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError


def check_points(x, d=None, name="x"):
    """Coerce to a float ``(n, d)`` array; 1-d input becomes a single row."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise InputError(f"{name} must be 2-d (n, d), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} contains non-finite values")
    if d is not None and x.shape[1] != d:
        raise InputError(f"{name} has {x.shape[1]} columns, expected {d}")
    return x


def check_fidelities(m, n=None, n_fidelities=None, name="m"):
    """Coerce to an int vector of 1-based fidelity indices."""
    m = np.asarray(m)
    if m.ndim == 0:
        m = m[None]
    if m.ndim != 1:
        raise InputError(f"{name} must be a scalar or 1-d, got shape {m.shape}")
    if not np.all(np.equal(np.mod(m, 1), 0)):
        raise InputError(f"{name} must contain integers")
    m = m.astype(int)
    if n is not None and m.shape[0] != n:
        raise InputError(f"{name} has length {m.shape[0]}, expected {n}")
    if np.any(m < 1):
        raise InputError(f"{name} contains fidelity < 1")
    if n_fidelities is not None and np.any(m > n_fidelities):
        raise InputError(
            f"{name} contains fidelity > M={n_fidelities}"
        )
    return m


def check_vector(y, n=None, name="y"):
    y = np.asarray(y, dtype=float)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    if y.ndim != 1:
        raise InputError(f"{name} must be 1-d, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError(f"{name} contains non-finite values")
    if n is not None and y.shape[0] != n:
        raise InputError(f"{name} has length {y.shape[0]}, expected {n}")
    return y


def split_augmented(X, n_fidelities=None):
    """Split a design matrix with a trailing fidelity column into (x, m)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise InputError(
            f"augmented X must be (n, d+1) with a fidelity column, got {X.shape}"
        )
    x = check_points(X[:, :-1], name="X[:, :-1]")
    m = check_fidelities(X[:, -1], n=X.shape[0], n_fidelities=n_fidelities,
                         name="X fidelity column")
    return x, m


def augment(x, m):
    """Append a fidelity column to ``x`` (broadcasting a scalar fidelity)."""
    x = check_points(x)
    m = np.broadcast_to(np.asarray(m, dtype=float), (x.shape[0],))
    return np.c_[x, m]
