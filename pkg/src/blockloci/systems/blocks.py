"""Linear dynamic blocks (rational transfer functions in z^-1) and static
nonlinearities (polynomial or piecewise polynomial)."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .. import _poly


@dataclass(frozen=True)
class RationalTF:
    """``z^-delay * B(z^-1) / A(z^-1)`` with ``A`` monic (``den[0] == 1``).

    Coefficients are given in ascending powers of ``z^-1``. A denominator
    with a non-unit leading term is normalized on construction.
    """

    num: Tuple[float, ...]
    den: Tuple[float, ...] = (1.0,)
    delay: int = 0
    stable: bool = True

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if num.ndim != 1 or den.ndim != 1:
            raise ValueError("coefficient arrays must be one-dimensional")
        if not np.all(np.isfinite(num)) or not np.all(np.isfinite(den)):
            raise ValueError("coefficients must be finite")
        if den[0] == 0.0:
            raise ValueError("denominator leading coefficient must be nonzero")
        if not np.any(num):
            raise ValueError("numerator is identically zero")
        if int(self.delay) != self.delay or self.delay < 0:
            raise ValueError("delay must be a nonnegative integer")
        num, den = num / den[0], den / den[0]
        object.__setattr__(self, "num", tuple(float(x) for x in num))
        object.__setattr__(self, "den", tuple(float(x) for x in den))
        object.__setattr__(self, "delay", int(self.delay))

    @classmethod
    def gain(cls, k):
        return cls((float(k),))

    @property
    def nb(self):
        return len(self.num) - 1

    @property
    def na(self):
        return len(self.den) - 1

    @property
    def full_num(self):
        """Numerator with the delay folded in as leading zeros."""
        return _poly.shift(np.asarray(self.num), self.delay)

    @property
    def effective_delay(self):
        """Samples before the input can influence the output."""
        full = self.full_num
        return int(np.flatnonzero(full)[0])

    @property
    def is_static(self):
        return self.na == 0 and self.nb == 0 and self.delay == 0

    def dc_gain(self):
        a = sum(self.den)
        if a == 0.0:
            raise ZeroDivisionError("DC gain undefined: A(1) = 0")
        return sum(self.num) / a

    def poles(self):
        return _poly.companion_roots(np.asarray(self.den))

    def is_stable(self):
        p = self.poles()
        return bool(np.all(np.abs(p) < 1.0)) if p.size else True

    def freqresp(self, f):
        """Complex response at normalized frequencies ``f``."""
        zinv = np.exp(-2j * np.pi * np.asarray(f, dtype=float))
        return _poly.evaluate(self.full_num, zinv) / _poly.evaluate(self.den, zinv)

    def to_dict(self):
        return {"num": list(self.num), "den": list(self.den), "delay": self.delay,
                "stable": self.stable}


@dataclass(frozen=True)
class StaticNL:
    """Static map built from polynomial pieces (ascending coefficients).

    With ``k`` breakpoints there are ``k + 1`` pieces; piece ``i`` applies on
    ``[breakpoints[i-1], breakpoints[i])``. At a breakpoint the right piece
    is used, so the map is right-continuous.
    """

    pieces: Tuple[Tuple[float, ...], ...]
    breakpoints: Tuple[float, ...] = ()

    def __post_init__(self):
        pieces = tuple(tuple(float(c) for c in np.atleast_1d(p)) for p in self.pieces)
        bps = tuple(float(b) for b in self.breakpoints)
        if len(pieces) != len(bps) + 1:
            raise ValueError("need exactly one more piece than breakpoints")
        if any(len(p) == 0 for p in pieces):
            raise ValueError("empty polynomial piece")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must increase strictly")
        if not all(np.isfinite(c) for p in pieces for c in p) or not all(np.isfinite(bps)):
            raise ValueError("nonlinearity parameters must be finite")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def polynomial(cls, coeffs):
        return cls((tuple(coeffs),))

    @classmethod
    def piecewise(cls, breakpoints, pieces):
        return cls(tuple(tuple(p) for p in pieces), tuple(breakpoints))

    @property
    def kind(self):
        return "polynomial" if not self.breakpoints else "piecewise"

    @property
    def degree(self):
        return max(len(p) for p in self.pieces) - 1

    def is_affine(self):
        return all(not any(p[2:]) for p in self.pieces) and not self.breakpoints

    def _segment(self, x):
        return np.searchsorted(self.breakpoints, x, side="right")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not self.breakpoints:
            return P.polyval(x, self.pieces[0])
        seg = self._segment(x)
        out = np.empty_like(x)
        for i, p in enumerate(self.pieces):
            m = seg == i
            out[m] = P.polyval(x[m], p)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """Derivative using the piece selected by :meth:`__call__`."""
        x = np.asarray(x, dtype=float)
        seg = self._segment(x) if self.breakpoints else np.zeros(x.shape, dtype=int)
        out = np.empty_like(x)
        for i, p in enumerate(self.pieces):
            m = seg == i
            out[m] = P.polyval(x[m], P.polyder(p)) if len(p) > 1 else 0.0
        return out if out.ndim else float(out)

    def one_sided(self, u):
        """``(f(u-), f(u+), f'(u-), f'(u+))`` at ``u``."""
        u = float(u)
        if u in self.breakpoints:
            i = self.breakpoints.index(u)
            left, right = self.pieces[i], self.pieces[i + 1]
        else:
            left = right = self.pieces[int(self._segment(u))]
        val = lambda p: float(P.polyval(u, p))
        der = lambda p: float(P.polyval(u, P.polyder(p))) if len(p) > 1 else 0.0
        return val(left), val(right), der(left), der(right)

    @property
    def jumps(self):
        """Per breakpoint: (value jumps, slope jumps)."""
        out = []
        for b in self.breakpoints:
            fl, fr, dl, dr = self.one_sided(b)
            out.append((not np.isclose(fl, fr, rtol=1e-12, atol=1e-12),
                        not np.isclose(dl, dr, rtol=1e-12, atol=1e-12)))
        return tuple(out)

    def to_dict(self):
        if not self.breakpoints:
            return {"poly": list(self.pieces[0])}
        return {"breakpoints": list(self.breakpoints),
                "pieces": [list(p) for p in self.pieces]}
