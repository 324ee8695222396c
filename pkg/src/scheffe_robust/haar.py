"""Haar wavelet utilities on [0, 1].

Coefficients are stored as a flat vector ordered by level: level ``l`` holds
``2**l`` entries at positions ``2**l - 1 .. 2**(l+1) - 2``.  A vector with
levels ``0..max_level`` determines a piecewise-constant function on ``2**(max_level+1)``
equal cells, where ``psi_lk(t) = 2**(l/2) * psi(2**l t - k)`` and ``psi`` is
``+1`` on ``[0, 1/2)`` and ``-1`` on ``[1/2, 1)``.
"""

from functools import lru_cache

import numpy as np

from .errors import ConfigurationError


def n_coefficients(max_level):
    return 2 ** (max_level + 1) - 1


def max_level_of(coeffs):
    """Infer the top level from a coefficient vector of length ``2**(level+1) - 1``."""
    size = np.shape(coeffs)[-1]
    level = int(np.log2(size + 1)) - 1
    if n_coefficients(level) != size or level < 0:
        raise ConfigurationError(f"coefficient vector of length {size} is not a full Haar pyramid")
    return level


def level_index(max_level):
    """Level ``l`` of every coefficient position."""
    return np.concatenate([np.full(2**l, l) for l in range(max_level + 1)])


def split_levels(coeffs):
    """Return the list of per-level coefficient arrays."""
    coeffs = np.asarray(coeffs, dtype=float)
    top = max_level_of(coeffs)
    return [coeffs[2**l - 1: 2 ** (l + 1) - 1] for l in range(top + 1)]


@lru_cache(maxsize=32)
def _synthesis_matrix(max_level):
    n_cells = 2 ** (max_level + 1)
    cells = np.arange(n_cells)
    cols = []
    for l in range(max_level + 1):
        shift = max_level + 1 - l
        k = cells >> shift
        sign = np.where(((cells >> (shift - 1)) & 1) == 0, 1.0, -1.0)
        for kk in range(2**l):
            cols.append(np.where(k == kk, sign * 2 ** (l / 2), 0.0))
    B = np.column_stack(cols)
    B.setflags(write=False)
    return B


def synthesis_matrix(max_level):
    """Cell values of every basis function, shape ``(2**(max_level+1), 2**(max_level+1)-1)``."""
    return _synthesis_matrix(int(max_level))


def synthesize(coeffs, base=0.0):
    """Cell values of ``base + sum_lk c_lk psi_lk``.

    ``coeffs`` may be 1-D or a stack of shape ``(m, ncoef)``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    return base + coeffs @ synthesis_matrix(max_level_of(coeffs)).T


def analyze(values):
    """Inverse of :func:`synthesize`: returns ``(mean, coeffs)`` of cell values."""
    values = np.asarray(values, dtype=float)
    n_cells = values.shape[-1]
    top = int(np.log2(n_cells)) - 1
    if 2 ** (top + 1) != n_cells or top < 0:
        raise ConfigurationError("number of cells must be a power of two >= 2")
    B = synthesis_matrix(top)
    # columns of B are orthogonal with squared norm n_cells in the cell sum
    coeffs = values @ B / n_cells
    return values.mean(axis=-1), coeffs


def wavelet_sup_norm(coeffs):
    """``sum_l 2**(l/2) * max_k |c_lk|``, the wavelet proxy for the sup-norm."""
    return float(sum(2 ** (l / 2) * np.max(np.abs(c)) for l, c in enumerate(split_levels(coeffs))))


def holder_radius(coeffs, beta):
    """Smallest ``scale`` with ``2**(l(1/2+beta)) |c_lk| <= scale`` for all ``l, k``."""
    coeffs = np.asarray(coeffs, dtype=float)
    lev = level_index(max_level_of(coeffs))
    return float(np.max(2.0 ** (lev * (0.5 + beta)) * np.abs(coeffs)))


def holder_bounds(max_level, beta, scale):
    """Per-coefficient magnitude caps ``scale * 2**(-l(1/2+beta))``."""
    return scale * 2.0 ** (-level_index(max_level) * (0.5 + beta))
