"""Per-signal feature extractors and their aggregation over a sample grid.

Six families describe each signal:

========  =====  ==================================================
family    depth  content
========  =====  ==================================================
time      11     moments, extremes, mean crossings, EMG integrals
freq      14     spectral moments, shape moments, MF / MPF
dwt       15     (c_max, singular value, c_energy) of 5 DWT sets
wpd       8      log-energy of each level-3 packet subband
ar        14     AR(10) then AR(4) coefficients
entropy   1      Shannon entropy of the amplitude histogram
========  =====  ==================================================
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import wavelets
from .dataset import N_MOVEMENTS, N_MUSCLES
from .errors import (
    CsEmgError,
    DegenerateSignalError,
    InvalidSignalError,
    TooShortError,
    UnusableSampleError,
)

FAMILIES = ("time", "freq", "dwt", "wpd", "ar", "entropy")

TIME_NAMES = ("mean", "var", "std", "mode", "max", "min", "over_zero", "range", "aemg", "iemg", "rms")
FREQ_NAMES = (
    "dc", "mean", "var", "std", "skew", "kurt", "entropy",
    "s_mean", "s_std", "s_var", "s_skew", "s_kurt", "mf", "mpf",
)
DWT_SETS = ("ca5", "cd5", "cd4", "cd3", "cd2")
DWT_NAMES = tuple(f"{s}_{f}" for s in DWT_SETS for f in ("cmax", "sv", "energy"))
WPD_NAMES = tuple(f"band{b}" for b in range(8))
AR_NAMES = tuple(f"ar10_{i}" for i in range(1, 11)) + tuple(f"ar4_{i}" for i in range(1, 5))
ENTROPY_NAMES = ("entropy",)

FEATURE_NAMES = dict(zip(FAMILIES, (TIME_NAMES, FREQ_NAMES, DWT_NAMES, WPD_NAMES, AR_NAMES, ENTROPY_NAMES)))
DEPTHS = tuple(len(FEATURE_NAMES[f]) for f in FAMILIES)
N_FEATURES = N_MUSCLES * N_MOVEMENTS * sum(DEPTHS)


@dataclass(frozen=True)
class FeatureConfig:
    wavelet: str = "db4"
    padding: str = "symmetric"
    wpd_order: str = "freq"
    dwt_level: int = 5
    wpd_level: int = 3
    ar_orders: tuple = (10, 4)
    mode_bins: int = 64
    entropy_bins: int = 128
    rms_sqrt: bool = False
    sample_rate: float = 1000.0
    log_floor: float = -12.0

    def __post_init__(self):
        object.__setattr__(self, "ar_orders", tuple(int(p) for p in self.ar_orders))
        wavelets.get_wavelet(self.wavelet)
        if self.padding not in wavelets.MODES:
            raise ValueError(f"unknown padding {self.padding!r}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.ar_orders != (10, 4) or self.dwt_level != 5 or self.wpd_level != 3:
            # family depths are fixed by the grid geometry the network expects
            raise ValueError("dwt_level=5, wpd_level=3 and ar_orders=(10, 4) are fixed")

    def to_dict(self):
        d = dict(self.__dict__)
        d["ar_orders"] = list(self.ar_orders)
        return d

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def _as_signal(signal, min_len):
    x = np.asarray(signal, dtype=np.float64).ravel()
    if x.size < min_len:
        raise TooShortError(f"signal of length {x.size} is shorter than {min_len}")
    if not np.all(np.isfinite(x)):
        raise InvalidSignalError("signal contains non-finite values")
    return x


def _log10_floor(value, floor):
    if value > 0:
        return max(float(np.log10(value)), floor)
    return floor


# -- time domain ----------------------------------------------------------------


def time_features(signal, mode_bins=64, rms_sqrt=False):
    """Eleven time-domain features, ordered as ``TIME_NAMES``.

    ``rms`` is the mean square (1/n) sum p_i**2 unless ``rms_sqrt`` is set.
    ``over_zero`` counts sign changes of the mean-removed signal and ``mode``
    is the centre of the fullest of ``mode_bins`` equal bins over [min, max].
    """
    x = _as_signal(signal, 2)
    n = x.size
    mean = x.mean()
    dev = x - mean
    var = float(np.mean(dev**2))
    lo, hi = float(x.min()), float(x.max())
    if hi > lo:
        counts, edges = np.histogram(x, bins=mode_bins, range=(lo, hi))
        b = int(np.argmax(counts))
        mode = 0.5 * (edges[b] + edges[b + 1])
    else:
        mode = lo
    over_zero = float(np.count_nonzero(dev[:-1] * dev[1:] < 0))
    iemg = float(np.abs(dev).sum())
    ms = float(np.mean(x * x))
    return np.array(
        [mean, var, np.sqrt(var), mode, hi, lo, over_zero, hi - lo, iemg / n, iemg, np.sqrt(ms) if rms_sqrt else ms]
    )


# -- frequency domain -------------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    coefficients: np.ndarray
    one_sided: np.ndarray
    n: int


def dft_spectrum(signal):
    """Unnormalized forward DFT and the one-sided magnitude sequence."""
    x = _as_signal(signal, 2)
    X = np.fft.fft(x)
    return Spectrum(X, np.abs(X[: x.size // 2 + 1]), x.size)


def _standard_moments(values, weights=None):
    """Mean, variance, skewness, excess kurtosis; skew/kurt are 0 when var is 0."""
    if weights is None:
        weights = np.full(values.size, 1.0 / values.size)
    mean = float(weights @ values)
    dev = values - mean
    var = float(weights @ dev**2)
    if var <= 0:
        return mean, 0.0, 0.0, 0.0
    std = np.sqrt(var)
    z = dev / std
    return mean, var, float(weights @ z**3), float(weights @ z**4) - 3.0


def freq_features(spectrum, sample_rate=1000.0):
    """Fourteen frequency-domain features, ordered as ``FREQ_NAMES``.

    Amplitude moments treat the one-sided magnitudes as a sample; shape
    moments treat the normalized magnitudes as a distribution over the bin
    index. MF and MPF use the one-sided power on the axis i * fs / n.
    """
    x = np.asarray(spectrum.one_sided, dtype=np.float64)
    if x.size == 0:
        raise TooShortError("empty spectrum")
    dc = float(x[0])
    mean, var, skew, kurt = _standard_moments(x)
    total = x.sum()
    if total <= 0:
        warnings.warn("all-zero spectrum; shape features, mf and mpf set to 0", RuntimeWarning, stacklevel=2)
        return np.array([dc, mean, var, np.sqrt(var), skew, kurt] + [0.0] * 8)
    q = x / total
    nz = q[q > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    idx = np.arange(x.size, dtype=np.float64)
    s_mean, s_var, s_skew, s_kurt = _standard_moments(idx, q)
    power = x * x
    freqs = idx * (sample_rate / spectrum.n)
    cum = np.cumsum(power)
    mf = float(freqs[np.searchsorted(cum, 0.5 * cum[-1])])
    mpf = float(freqs @ power / cum[-1])
    return np.array(
        [dc, mean, var, np.sqrt(var), skew, kurt, entropy, s_mean, np.sqrt(s_var), s_var, s_skew, s_kurt, mf, mpf]
    )


# -- time-frequency ---------------------------------------------------------------


def coefficient_set_features(coeffs, log_floor=-12.0):
    """(c_max, singular value, c_energy) of one coefficient set.

    c_max is the largest log10 over the strictly positive coefficients; the
    singular value of a 1 x m matrix is its Euclidean norm.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    pos = c[c > 0]
    c_max = _log10_floor(pos.max(), log_floor) if pos.size else log_floor
    norm = float(np.sqrt(c @ c))
    return c_max, norm, _log10_floor(norm / c.size, log_floor)


def dwt_features(signal, wavelet="db4", padding="symmetric", log_floor=-12.0):
    """15 features from the level-5 approximation and the level 5..2 details."""
    x = _as_signal(signal, 2)
    coeffs = wavelets.wavedec(x, wavelet, level=5, mode=padding)
    out = []
    for c in coeffs[:5]:
        out.extend(coefficient_set_features(c, log_floor))
    return np.array(out)


def wpd_features(signal, wavelet="db4", padding="symmetric", order="freq", log_floor=-12.0):
    """log10(||c|| / |c|) of each of the 8 level-3 packet subbands."""
    x = _as_signal(signal, 2)
    bands = wavelets.wavelet_packet(x, wavelet, level=3, mode=padding, order=order)
    return np.array([_log10_floor(np.sqrt(b @ b) / b.size, log_floor) for b in bands])


# -- autoregressive ----------------------------------------------------------------


@dataclass(frozen=True)
class ARFit:
    order: int
    coefficients: np.ndarray
    noise_variance: float
    reflection: np.ndarray = field(repr=False)


def autocorrelation(x, max_lag):
    """Biased estimate r[l] = (1/n) sum_t x[t] x[t+l] for l = 0..max_lag."""
    n = x.size
    return np.array([x[: n - lag] @ x[lag:] / n for lag in range(max_lag + 1)])


def levinson_durbin(r, order):
    """Solve the Yule-Walker equations for ``order`` from autocorrelations ``r``.

    Returns (phi, prediction error variance, reflection coefficients) with
    the convention y(t) = sum_i phi_i y(t - i) + e(t).
    """
    r = np.asarray(r, dtype=np.float64)
    if r.size < order + 1:
        raise ValueError(f"need {order + 1} autocorrelation lags, got {r.size}")
    if r[0] <= 0:
        raise DegenerateSignalError("zero-variance signal: autocorrelation matrix is singular")
    phi = np.zeros(order)
    refl = np.zeros(order)
    err = r[0]
    for m in range(order):
        k = (r[m + 1] - phi[:m] @ r[m:0:-1]) / err
        if not abs(k) < 1.0:
            raise DegenerateSignalError(f"reflection coefficient {k} at order {m + 1} is not inside the unit circle")
        phi[:m] = phi[:m] - k * phi[:m][::-1]
        phi[m] = k
        refl[m] = k
        err *= 1.0 - k * k
    return phi, err, refl


def fit_ar(signal, order):
    """Mean-removed Levinson-Durbin AR fit."""
    x = _as_signal(signal, order + 1)
    dev = x - x.mean()
    scale = np.max(np.abs(x))
    r = autocorrelation(dev, order)
    if r[0] <= (1e-12 * scale) ** 2:
        raise DegenerateSignalError("zero-variance signal: autocorrelation matrix is singular")
    phi, err, refl = levinson_durbin(r, order)
    return ARFit(order, phi, max(float(err), 0.0), refl)


def ar_features(signal, orders=(10, 4)):
    x = _as_signal(signal, 21)
    return np.concatenate([fit_ar(x, p).coefficients for p in orders])


# -- entropy -----------------------------------------------------------------------


def entropy_feature(signal, bins=128):
    """Shannon entropy (nats) of the signal's amplitude histogram."""
    x = _as_signal(signal, 2)
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        return 0.0
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / x.size
    return float(-(p * np.log(p)).sum())


# -- aggregation -------------------------------------------------------------------


def extract_signal(signal, config=FeatureConfig()):
    """Run all six extractors; a family that fails yields ``None``."""
    extractors = (
        lambda x: time_features(x, config.mode_bins, config.rms_sqrt),
        lambda x: freq_features(dft_spectrum(x), config.sample_rate),
        lambda x: dwt_features(x, config.wavelet, config.padding, config.log_floor),
        lambda x: wpd_features(x, config.wavelet, config.padding, config.wpd_order, config.log_floor),
        lambda x: ar_features(x, config.ar_orders),
        lambda x: np.array([entropy_feature(x, config.entropy_bins)]),
    )
    out = []
    for fn in extractors:
        try:
            out.append(fn(signal))
        except CsEmgError:
            out.append(None)
    return out


@dataclass(eq=False)
class FeatureSample:
    """Features of one sample in source muscle order.

    ``families[k]`` has shape (6, 7, DEPTHS[k]) with NaN in missing cells;
    ``mask[k, i, j]`` is True when family k failed on cell (i, j).
    """

    families: list
    mask: np.ndarray
    label: int
    subject_id: str = ""
    trial_choice: tuple = ()

    def flat(self):
        """All 2646 values as (family, muscle, movement, feature)."""
        return np.concatenate([f.ravel() for f in self.families])

    def flat_mask(self):
        return np.concatenate(
            [np.repeat(self.mask[k].ravel(), d) for k, d in enumerate(DEPTHS)]
        )

    @classmethod
    def from_flat(cls, values, mask, label, subject_id="", trial_choice=()):
        families = []
        pos = 0
        for d in DEPTHS:
            size = N_MUSCLES * N_MOVEMENTS * d
            families.append(np.asarray(values[pos : pos + size], dtype=np.float64).reshape(N_MUSCLES, N_MOVEMENTS, d))
            pos += size
        return cls(families, np.asarray(mask, dtype=bool).reshape(len(FAMILIES), N_MUSCLES, N_MOVEMENTS),
                   int(label), subject_id, tuple(trial_choice))


def column_names():
    return [
        f"{fam}_{i}_{j}_{name}"
        for fam in FAMILIES
        for i in range(N_MUSCLES)
        for j in range(N_MOVEMENTS)
        for name in FEATURE_NAMES[fam]
    ]


def mask_column_names():
    return [f"mask_{fam}_{i}_{j}" for fam in FAMILIES for i in range(N_MUSCLES) for j in range(N_MOVEMENTS)]


def extract_sample(grid, config=FeatureConfig(), cache=None):
    """Extract every family on all 42 cells of a SampleGrid.

    ``cache`` (a dict) memoizes per-recording results, which matters because
    assembled samples share recordings. More than half the cells failing in
    some family rejects the sample.
    """
    families = [np.full((N_MUSCLES, N_MOVEMENTS, d), np.nan) for d in DEPTHS]
    mask = np.zeros((len(FAMILIES), N_MUSCLES, N_MOVEMENTS), dtype=bool)
    for i in range(N_MUSCLES):
        for j in range(N_MOVEMENTS):
            rec = grid.cell(i, j)
            if cache is None:
                cell = extract_signal(rec.samples, config)
            else:
                key = id(rec)
                if key not in cache:
                    cache[key] = (rec, extract_signal(rec.samples, config))
                cell = cache[key][1]
            for k, values in enumerate(cell):
                if values is None:
                    mask[k, i, j] = True
                else:
                    families[k][i, j] = values
    bad_cells = int(mask.any(axis=0).sum())
    if bad_cells > N_MUSCLES * N_MOVEMENTS // 2:
        raise UnusableSampleError(f"{bad_cells} of 42 cells failed feature extraction")
    return FeatureSample(families, mask, grid.label, grid.subject_id, grid.trial_choice)
