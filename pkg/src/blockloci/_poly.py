"""Polynomial helpers for coefficient arrays in ascending powers of z^-1.

A coefficient array ``c`` stands for ``c[0] + c[1] z^-1 + ... + c[n] z^-n``.
"""
import numpy as np


def as_poly(c):
    return np.atleast_1d(np.asarray(c, dtype=float))


def padd(a, b):
    n = max(len(a), len(b))
    out = np.zeros(n, dtype=np.result_type(a, b))
    out[: len(a)] += a
    out[: len(b)] += b
    return out


def pmul(a, b):
    return np.convolve(a, b)


def shift(c, d):
    """Multiply by z^-d."""
    if d == 0:
        return np.asarray(c)
    return np.concatenate([np.zeros(d, dtype=np.asarray(c).dtype), c])


def trim(c, rtol=1e-14):
    """Drop trailing (highest power) coefficients that are negligible."""
    c = np.asarray(c)
    if c.size == 0:
        return c
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return c[:1]
    k = len(c)
    while k > 1 and abs(c[k - 1]) <= rtol * scale:
        k -= 1
    return c[:k]


def leading_zeros(c, rtol=0.0):
    """Number of leading coefficients that vanish (pure delay order)."""
    c = np.asarray(c)
    scale = np.max(np.abs(c)) if c.size else 0.0
    k = 0
    while k < len(c) - 1 and abs(c[k]) <= rtol * scale:
        k += 1
    return k


def evaluate(c, zinv):
    """Evaluate the polynomial at the points ``zinv`` (values of z^-1)."""
    zinv = np.asarray(zinv)
    acc = np.zeros_like(zinv, dtype=complex)
    for coef in np.asarray(c)[::-1]:
        acc = acc * zinv + coef
    return acc


def companion_roots(c):
    """Roots in z of ``c[0] z^n + c[1] z^(n-1) + ... + c[n]``.

    Eigenvalues of the companion matrix. Leading zeros of ``c`` lower the
    degree; trailing zeros give roots at the origin.
    """
    c = np.asarray(c)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    c = c[nz[0]:]
    n = len(c) - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    comp = np.zeros((n, n), dtype=np.result_type(c, float))
    comp[0, :] = -c[1:] / c[0]
    comp[np.arange(1, n), np.arange(n - 1)] = 1.0
    return np.linalg.eigvals(comp).astype(complex)


def from_roots(roots):
    """Monic coefficient array whose companion roots are ``roots``."""
    c = np.array([1.0 + 0j])
    for r in roots:
        c = np.convolve(c, [1.0, -r])
    if np.allclose(c.imag, 0.0, atol=1e-12):
        return c.real
    return c


def sort_roots(r):
    r = np.asarray(r, dtype=complex)
    return r[np.lexsort((r.imag, r.real))]
