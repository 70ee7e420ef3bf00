"""Orthogonal discrete wavelet transform and wavelet packet decomposition.

Daubechies filters are built by spectral factorization, so any ``db<N>``
(``haar`` = ``db1``) is available. Two boundary extensions are supported:

* ``symmetric``: half-sample mirror extension; coefficient sets are
  ``floor((n + L - 1) / 2)`` long and reconstruction is exact, but the
  transform is not energy preserving near the edges.
* ``periodization``: circular extension; ``ceil(n / 2)`` coefficients and an
  exactly orthogonal transform for even lengths.

Coefficient conventions follow PyWavelets so results can be cross-checked.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import TooShortError

MODES = ("symmetric", "periodization")


@dataclass(frozen=True)
class Wavelet:
    name: str
    dec_lo: np.ndarray
    dec_hi: np.ndarray
    rec_lo: np.ndarray
    rec_hi: np.ndarray

    @property
    def length(self):
        return self.dec_lo.size


def _daubechies_scaling(order):
    # |Q(w)|^2 = P(sin^2(w/2)); keep the root of each reciprocal pair inside the unit circle
    p = [comb(order - 1 + k, k) for k in range(order)]
    zeros = []
    for y in np.roots(p[::-1]):
        pair = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        zeros.append(pair[np.argmin(np.abs(pair))])
    q = np.real(np.poly(zeros)) if zeros else np.array([1.0])
    h = np.array([1.0])
    for _ in range(order):
        h = np.convolve(h, [1.0, 1.0])
    h = np.convolve(h, q)
    return h * (np.sqrt(2.0) / h.sum())


@functools.lru_cache(maxsize=None)
def get_wavelet(name="db4"):
    if name == "haar":
        order = 1
    elif name.startswith("db") and name[2:].isdigit():
        order = int(name[2:])
    else:
        raise ValueError(f"unsupported wavelet {name!r}; use 'haar' or 'db<N>'")
    if not 1 <= order <= 10:
        raise ValueError(f"Daubechies order must be in 1..10, got {order}")
    h = _daubechies_scaling(order)
    signs = np.where(np.arange(h.size) % 2 == 0, -1.0, 1.0)
    dec_lo = h[::-1].copy()
    dec_hi = signs * h
    arrays = [dec_lo, dec_hi, h.copy(), dec_hi[::-1].copy()]
    for a in arrays:
        a.setflags(write=False)
    return Wavelet(name, *arrays)


def _as_wavelet(wavelet):
    return wavelet if isinstance(wavelet, Wavelet) else get_wavelet(wavelet)


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown padding mode {mode!r}; expected one of {MODES}")


def dwt_max_level(n, filter_len):
    if filter_len < 2 or n < filter_len - 1:
        return 0
    return int(np.floor(np.log2(n / (filter_len - 1))))


def _period_shift(filter_len):
    return filter_len // 2 - 1


def _analysis(x, filt, mode):
    L = filt.size
    if mode == "symmetric":
        ext = np.pad(x, L - 1, mode="symmetric")
        return np.convolve(ext, filt, mode="valid")[1::2]
    if x.size % 2:
        x = np.append(x, x[-1])
    n = x.size
    # out[o] = sum_j filt[j] * x[(2o + 1 + shift - j) mod n]
    base = np.arange(n // 2) * 2 + 1 + _period_shift(L)
    return x[(base[:, None] - np.arange(L)[None, :]) % n] @ filt


def dwt(x, wavelet="db4", mode="symmetric"):
    """Single-level decomposition into (approximation, detail)."""
    _check_mode(mode)
    w = _as_wavelet(wavelet)
    x = np.asarray(x, dtype=np.float64)
    return _analysis(x, w.dec_lo, mode), _analysis(x, w.dec_hi, mode)


def idwt(ca, cd, wavelet="db4", mode="symmetric"):
    """Single-level reconstruction; the inverse of :func:`dwt`.

    Symmetric mode returns ``2 * len(ca) - L + 2`` samples, periodization
    ``2 * len(ca)``; callers trim an odd-length original.
    """
    _check_mode(mode)
    w = _as_wavelet(wavelet)
    ca = np.asarray(ca, dtype=np.float64)
    cd = np.asarray(cd, dtype=np.float64)
    if ca.shape != cd.shape:
        raise ValueError(f"coefficient lengths differ: {ca.size} vs {cd.size}")
    L = w.length
    m = ca.size
    if mode == "symmetric":
        up_a = np.zeros(2 * m)
        up_d = np.zeros(2 * m)
        up_a[::2] = ca
        up_d[::2] = cd
        full = np.convolve(up_a, w.rec_lo) + np.convolve(up_d, w.rec_hi)
        return full[L - 2 : 2 * m]
    # periodization: apply the transpose of the orthogonal analysis operator
    n = 2 * m
    out = np.zeros(n)
    base = np.arange(m) * 2 + 1 + _period_shift(L)
    for j in range(L):
        np.add.at(out, (base - j) % n, w.dec_lo[j] * ca + w.dec_hi[j] * cd)
    return out


def wavedec(x, wavelet="db4", level=5, mode="symmetric"):
    """Multilevel decomposition ``[cA_level, cD_level, ..., cD_1]``."""
    w = _as_wavelet(wavelet)
    x = np.asarray(x, dtype=np.float64)
    max_level = dwt_max_level(x.size, w.length)
    if level > max_level:
        raise TooShortError(
            f"signal of length {x.size} supports at most {max_level} levels of {w.name}, {level} requested"
        )
    details = []
    a = x
    for _ in range(level):
        a, d = dwt(a, w, mode)
        details.append(d)
    return [a] + details[::-1]


def waverec(coeffs, wavelet="db4", mode="symmetric", length=None):
    """Inverse of :func:`wavedec`; ``length`` trims to the original size."""
    w = _as_wavelet(wavelet)
    a = coeffs[0]
    for d in coeffs[1:]:
        if a.size == d.size + 1:
            a = a[:-1]
        a = idwt(a, d, w, mode)
    return a if length is None else a[:length]


def _gray_order(level):
    # frequency (low to high) ordering of the natural-order packet nodes
    return [i ^ (i >> 1) for i in range(2**level)]


def wavelet_packet(x, wavelet="db4", level=3, mode="symmetric", order="freq"):
    """Full binary-tree packet decomposition to ``level``.

    Returns ``2**level`` coefficient arrays. ``order="natural"`` lists nodes
    by filter path (a before d at each split); ``order="freq"`` sorts them by
    frequency band.
    """
    w = _as_wavelet(wavelet)
    x = np.asarray(x, dtype=np.float64)
    max_level = dwt_max_level(x.size, w.length)
    if level > max_level:
        raise TooShortError(
            f"signal of length {x.size} supports at most {max_level} packet levels of {w.name}, {level} requested"
        )
    nodes = [x]
    for _ in range(level):
        nxt = []
        for node in nodes:
            nxt.extend(dwt(node, w, mode))
        nodes = nxt
    if order == "natural":
        return nodes
    if order == "freq":
        return [nodes[i] for i in _gray_order(level)]
    raise ValueError(f"unknown packet order {order!r}")
