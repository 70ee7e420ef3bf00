import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cs_emg import wavelets as W
from cs_emg.errors import TooShortError

pywt = pytest.importorskip("pywt")

NAMES = ["haar"] + [f"db{k}" for k in range(1, 11)]


@pytest.mark.parametrize("name", NAMES)
def test_filter_bank_matches_reference(name):
    ours = W.get_wavelet(name)
    ref = pywt.Wavelet(name)
    for attr in ("dec_lo", "dec_hi", "rec_lo", "rec_hi"):
        assert np.allclose(getattr(ours, attr), getattr(ref, attr), atol=1e-12), attr


@pytest.mark.parametrize("name", ["db1", "db4", "db10"])
def test_filters_orthonormal(name):
    h = np.asarray(W.get_wavelet(name).rec_lo)
    assert abs(h.sum() - np.sqrt(2)) < 1e-12
    for s in range(0, h.size, 2):
        assert abs(h[: h.size - s] @ h[s:] - (1.0 if s == 0 else 0.0)) < 1e-12


@pytest.mark.parametrize("mode", W.MODES)
@pytest.mark.parametrize("n", [37, 64, 100, 257])
def test_dwt_matches_reference(mode, n):
    x = np.random.default_rng(n).standard_normal(n)
    ca, cd = W.dwt(x, "db4", mode)
    ra, rd = pywt.dwt(x, "db4", mode=mode)
    assert np.allclose(ca, ra, atol=1e-12) and np.allclose(cd, rd, atol=1e-12)


@pytest.mark.parametrize("mode", W.MODES)
def test_wavedec_matches_reference(mode):
    x = np.random.default_rng(1).standard_normal(1000)
    ours = W.wavedec(x, "db4", level=5, mode=mode)
    ref = pywt.wavedec(x, "db4", mode=mode, level=5)
    assert len(ours) == len(ref) == 6
    for a, b in zip(ours, ref):
        assert np.allclose(a, b, atol=1e-11)


@pytest.mark.parametrize("mode", W.MODES)
def test_packet_matches_reference(mode):
    x = np.random.default_rng(2).standard_normal(512)
    ours = W.wavelet_packet(x, "db4", level=3, mode=mode, order="freq")
    wp = pywt.WaveletPacket(x, "db4", mode=mode, maxlevel=3)
    ref = [node.data for node in wp.get_level(3, order="freq")]
    for a, b in zip(ours, ref):
        assert np.allclose(a, b, atol=1e-11)


def test_packet_natural_order():
    x = np.random.default_rng(3).standard_normal(256)
    nat = W.wavelet_packet(x, "db2", level=3, order="natural")
    wp = pywt.WaveletPacket(x, "db2", mode="symmetric", maxlevel=3)
    for a, node in zip(nat, wp.get_level(3, order="natural")):
        assert np.allclose(a, node.data, atol=1e-11)


@settings(max_examples=40, deadline=None)
@given(st.integers(64, 2048), st.sampled_from(["db1", "db2", "db4", "db8"]), st.sampled_from(W.MODES),
       st.integers(0, 2**31))
def test_perfect_reconstruction(n, name, mode, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    level = min(5, W.dwt_max_level(n, W.get_wavelet(name).length))
    y = W.waverec(W.wavedec(x, name, level=level, mode=mode), name, mode=mode, length=n)
    assert np.linalg.norm(y - x) / np.linalg.norm(x) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(8, 256), st.integers(0, 2**31))
def test_packet_energy_conserved_periodization(m, seed):
    x = np.random.default_rng(seed).standard_normal(8 * m)
    bands = W.wavelet_packet(x, "db4", level=3, mode="periodization")
    assert len(bands) == 8
    e = sum(float(b @ b) for b in bands)
    assert abs(e - x @ x) / (x @ x) < 1e-6


def test_too_short_for_level():
    with pytest.raises(TooShortError):
        W.wavedec(np.ones(40), "db4", level=5)


def test_unknown_wavelet_and_mode():
    with pytest.raises(ValueError):
        W.get_wavelet("sym4")
    with pytest.raises(ValueError):
        W.dwt(np.ones(32), "db4", mode="zero")
