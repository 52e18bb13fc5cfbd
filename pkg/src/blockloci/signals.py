"""Excitation signals: random-phase multisines, shaped Gaussian noise and
amplitude classes around a DC setpoint.

Frequencies are normalized (sample rate 1), so ``f`` lives in ``[0, 0.5)``
and DFT bin ``k`` of an ``N``-sample record sits at ``f = k / N``.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.signal.windows import blackmanharris

PHASE_LAWS = ("uniform", "binary")
CLASS_TAGS = ("S_eps", "S_delta", "riemann")

#: FIR length cap for the Gaussian shaping filter.
MAX_FILTER_LENGTH = 1024


@dataclass(frozen=True)
class PowerSpectrum:
    """Piecewise-constant two-sided power density on ``[0, 0.5)``.

    ``levels[i]`` holds on ``[freqs[i], freqs[i+1])``; the last segment runs
    up to 0.5. The variance of a signal with this spectrum is
    ``2 * integral(0, 0.5)``.
    """

    freqs: tuple
    levels: tuple

    def __post_init__(self):
        f = tuple(float(x) for x in self.freqs)
        s = tuple(float(x) for x in self.levels)
        if len(f) != len(s) or not f:
            raise ValueError("freqs and levels must be non-empty and equally long")
        if f[0] != 0.0:
            raise ValueError("first spectrum segment must start at f=0")
        if any(b <= a for a, b in zip(f, f[1:])) or f[-1] >= 0.5:
            raise ValueError("segment starts must increase strictly inside [0, 0.5)")
        if any(x < 0 or not np.isfinite(x) for x in s):
            raise ValueError("power density must be finite and nonnegative")
        if not any(x > 0 for x in s):
            raise ValueError("spectrum has no band with positive power")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "levels", s)

    @classmethod
    def flat(cls, level=1.0, band=(0.0, 0.5)):
        lo, hi = band
        freqs, levels = [0.0], [0.0]
        if lo > 0.0:
            freqs.append(lo)
            levels.append(level)
        else:
            levels[0] = level
        if hi < 0.5:
            freqs.append(hi)
            levels.append(0.0)
        return cls(tuple(freqs), tuple(levels))

    @property
    def edges(self):
        return np.append(self.freqs, 0.5)

    def __call__(self, f):
        f = np.abs(np.asarray(f, dtype=float))
        idx = np.searchsorted(self.freqs, f, side="right") - 1
        out = np.asarray(self.levels)[np.clip(idx, 0, None)]
        return np.where(f < 0.5, out, 0.0)

    def integral(self, f1, f2):
        """Exact integral of the density over ``[f1, f2]`` (one-sided)."""
        edges = self.edges
        lo = np.clip(edges[:-1], f1, f2)
        hi = np.clip(edges[1:], f1, f2)
        return float(np.sum(np.asarray(self.levels) * (hi - lo)))

    def variance(self):
        return 2.0 * self.integral(0.0, 0.5)


@dataclass(frozen=True)
class MultisineSpec:
    """Period length, excited bins, spectrum and phase law of a multisine."""

    N: int
    bins: tuple
    spectrum: PowerSpectrum
    phase_law: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.N <= 0 or self.N % 2:
            raise ValueError(f"period length must be positive and even, got {self.N}")
        bins = tuple(int(k) for k in self.bins)
        if not bins:
            raise ValueError("excited-bin set is empty")
        if min(bins) < 1 or max(bins) > self.N // 2 - 1 or len(set(bins)) != len(bins):
            raise ValueError(f"bins must be distinct and inside 1..{self.N // 2 - 1}")
        if self.phase_law not in PHASE_LAWS:
            raise ValueError(f"unknown phase law {self.phase_law!r}")
        object.__setattr__(self, "bins", tuple(sorted(bins)))

    @classmethod
    def from_spectrum(cls, N, spectrum, phase_law="uniform", seed=0):
        """Excite every bin where the spectrum is positive."""
        k = np.arange(1, N // 2)
        bins = k[spectrum(k / N) > 0]
        return cls(N, tuple(bins), spectrum, phase_law, seed)


@dataclass(frozen=True)
class Signal:
    """A real record plus its setpoint, amplitude scale and class."""

    samples: np.ndarray = field(repr=False)
    dc: float = 0.0
    eps: float = 0.0
    class_tag: str = "riemann"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.class_tag not in CLASS_TAGS:
            raise ValueError(f"unknown class tag {self.class_tag!r}")

    def __len__(self):
        return len(self.samples)

    @property
    def ac(self):
        return self.samples - self.dc

    def with_dc(self, dc):
        """Move the record to a new setpoint, keeping its AC part."""
        return replace(self, samples=self.ac + dc, dc=float(dc))

    def to_csv(self, path):
        idx = np.arange(len(self.samples))
        np.savetxt(path, np.column_stack([idx, self.samples]), delimiter=",",
                   fmt=["%d", "%.17g"], header="index,value", comments="")


def _draw_phases(rng, n, law):
    if law == "uniform":
        return rng.uniform(0.0, 2.0 * np.pi, n)
    return rng.choice(np.array([0.0, np.pi]), n)


def multisine_coefficients(spec, phases=None):
    """Full-length array of Fourier coefficients ``U_k`` (both signs of k)."""
    bins = np.asarray(spec.bins)
    if phases is None:
        rng = np.random.default_rng(spec.seed)
        phases = _draw_phases(rng, len(bins), spec.phase_law)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != bins.shape:
        raise ValueError("one phase per excited bin is required")
    amp = np.sqrt(spec.spectrum(bins / spec.N)) / np.sqrt(spec.N)
    U = np.zeros(spec.N, dtype=complex)
    U[bins] = amp * np.exp(1j * phases)
    U[spec.N - bins] = np.conj(U[bins])
    return U


def generate_multisine(spec, phases=None):
    """One period of a random-phase multisine.

    Parameters
    ----------
    spec : MultisineSpec
    phases : array_like, optional
        Explicit phases per excited bin; overrides the seeded draw.

    Returns
    -------
    Signal
        Zero-DC record of length ``spec.N`` tagged ``riemann``.
    """
    U = multisine_coefficients(spec, phases)
    u = np.fft.ifft(U).real * spec.N
    return Signal(u, 0.0, float(np.std(u)), "riemann")


def shaping_filter(spectrum, length):
    """Windowed FIR whose magnitude response samples ``sqrt(S)``."""
    L = int(length)
    k = np.arange(L)
    f = np.minimum(k, L - k) / L
    mag = np.sqrt(spectrum(f))
    h = np.roll(np.fft.ifft(mag).real, L // 2)
    if L > 2:
        h *= blackmanharris(L, sym=False)
    energy = np.sum(h * h)
    if energy == 0.0:
        raise ValueError("spectrum has no power on the filter grid")
    return h * np.sqrt(spectrum.variance() / energy)


def generate_gaussian(spectrum, N, seed=0):
    """Gaussian noise record with power spectrum ``spectrum``.

    White noise is passed through a windowed FIR realizing ``sqrt(S)``
    (length ``min(N, 1024)``); the first filter-length output samples are
    dropped as warm-up.
    """
    N = int(N)
    if N < 2:
        raise ValueError("record length must be at least 2")
    L = min(N, MAX_FILTER_LENGTH)
    h = shaping_filter(spectrum, L)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(N + L)
    u = np.convolve(w, h)[L:L + N]
    return Signal(u, 0.0, float(np.std(u)), "riemann")


def scale_to_class(signal, eps, cls="S_eps"):
    """Rescale the AC part so the amplitude-class invariant holds.

    ``S_eps`` fixes the standard deviation of ``samples - dc`` to ``eps``;
    ``S_delta`` fixes its maximum absolute value. The DC level is kept.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    ac = signal.ac
    if cls == "S_eps":
        size = float(np.std(ac))
    elif cls == "S_delta":
        size = float(np.max(np.abs(ac)))
    else:
        raise ValueError(f"unknown amplitude class {cls!r}")
    if size == 0.0:
        raise ValueError("signal has no AC energy to rescale")
    factor = eps / size
    if abs(factor - 1.0) > 1e-13:
        ac = ac * factor
        samples = ac + signal.dc
    else:
        # already in the class: keep the samples bit-identical
        samples = signal.samples
    return Signal(samples, signal.dc, float(eps), cls)


@dataclass(frozen=True)
class BandReport:
    band: tuple
    bins: tuple
    empirical: float
    target: float

    @property
    def deviation(self):
        return self.empirical - self.target

    @property
    def relative(self):
        return self.deviation / self.target if self.target else float("nan")


def check_riemann_equivalence(signal, spectrum, bands):
    """Compare summed bin power against the spectrum integral, per band.

    Parameters
    ----------
    signal : Signal or sequence of Signal
        Records of equal length; their bin powers are averaged.
    spectrum : PowerSpectrum
    bands : sequence of (w1, w2)
        Angular frequency bands in rad/sample with ``0 < w1 < w2 < pi``.

    Returns
    -------
    list of BandReport
        Empirical power ``sum_k |U_k|^2`` over bins ``int(w/2pi N)`` and the
        target ``(1/2pi) * integral S(w) dw``. No verdict is attached.
    """
    records = [signal] if isinstance(signal, Signal) else list(signal)
    N = len(records[0])
    if any(len(r) != N for r in records):
        raise ValueError("records must share one length")
    power = np.zeros(N)
    for r in records:
        x = r.samples - np.mean(r.samples)
        power += np.abs(np.fft.fft(x) / N) ** 2
    power /= len(records)
    out = []
    for w1, w2 in bands:
        if not (0.0 < w1 < np.pi and 0.0 < w2 < np.pi) or w2 < w1:
            raise ValueError(f"band ({w1}, {w2}) outside (0, pi) rad/sample")
        k1 = int(w1 / (2 * np.pi) * N)
        k2 = int(w2 / (2 * np.pi) * N)
        emp = float(np.sum(power[k1:k2 + 1]))
        tgt = spectrum.integral(w1 / (2 * np.pi), w2 / (2 * np.pi))
        out.append(BandReport((w1, w2), (k1, k2), emp, tgt))
    return out


def periodic_extend(samples, warmup):
    """Prefix ``warmup`` samples of the cyclic continuation of one period."""
    samples = np.asarray(samples)
    if warmup <= 0:
        return samples.copy()
    N = len(samples)
    idx = np.arange(-warmup, N) % N
    return samples[idx]


def excitation_record(spec, eps, dc, phases=None):
    """Multisine scaled to class ``S_eps`` around ``dc``."""
    base = generate_multisine(spec, phases)
    return scale_to_class(base, eps, "S_eps").with_dc(dc)


__all__ = [
    "PowerSpectrum", "MultisineSpec", "Signal", "BandReport",
    "generate_multisine", "generate_gaussian", "scale_to_class",
    "check_riemann_equivalence", "periodic_extend", "shaping_filter",
    "multisine_coefficients", "excitation_record",
]
