import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reflectorsim.link import (MAX_MEASURABLE_LOSS_DB, SOUNDER_BIN_WIDTH,
                               SOUNDER_MAX_EXCESS_DELAY, bin_cir, coherent_power)
from reflectorsim.scene import C0
from reflectorsim.tracer import Interaction, PropagationPath
from oracles import direct_power_dbm

X = np.array([1.0, 0.0, 0.0])


def make_path(amplitude, length=10.0, surface_id=None):
    inter = () if surface_id is None else (
        Interaction("specular", f"s{surface_id}", surface_id, np.zeros(3), 0.1),)
    return PropagationPath(inter, length, complex(amplitude), X, X)


def random_paths(rng, n):
    amps = rng.normal(size=n) + 1j * rng.normal(size=n)
    lengths = rng.uniform(5, 50, n)
    return [make_path(a * 1e-4, l, int(i % 7)) for i, (a, l) in enumerate(zip(amps, lengths))]


def test_single_free_space_path():
    r = coherent_power([make_path(10 ** (-81.39 / 20))], tx_power=0.0)
    assert r.rx_power == pytest.approx(-81.39, abs=1e-12)
    assert r.path_count == 1 and r.measurable


def test_single_path_exact():
    a = 0.00123 * np.exp(0.4j)
    assert coherent_power([make_path(a)], 7.0).rx_power == 7.0 + 20 * math.log10(abs(a))


def test_in_phase_doubling():
    one = coherent_power([make_path(1e-3)]).rx_power
    two = coherent_power([make_path(1e-3), make_path(1e-3, 11.0)]).rx_power
    assert two - one == pytest.approx(6.0206, abs=1e-4)


def test_antiphase_null():
    r = coherent_power([make_path(1e-3), make_path(-1e-3, 11.0)])
    assert r.rx_power == -math.inf
    assert not r.measurable


def test_empty_is_sentinel():
    r = coherent_power([], 0.0)
    assert r.rx_power == -math.inf and r.path_count == 0 and r.strongest_path is None


def test_measurability_threshold():
    at_limit = coherent_power([make_path(10 ** (-MAX_MEASURABLE_LOSS_DB / 20))])
    below = coherent_power([make_path(10 ** (-(MAX_MEASURABLE_LOSS_DB + 0.1) / 20))])
    assert at_limit.measurable and not below.measurable


def test_strongest_path_reported():
    paths = [make_path(1e-4), make_path(5e-3, 12.0), make_path(2e-3, 9.0)]
    assert coherent_power(paths).strongest_path is paths[1]


def test_matches_direct_summation_oracle():
    rng = np.random.default_rng(7)
    paths = random_paths(rng, 50)
    got = coherent_power(paths, 3.0).rx_power
    want = direct_power_dbm([p.amplitude for p in paths], 3.0)
    assert abs(got - want) < 1e-9


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 60))
def test_permutation_invariance(seed, n):
    rng = np.random.default_rng(seed)
    paths = random_paths(rng, n)
    shuffled = [paths[i] for i in rng.permutation(n)]
    assert coherent_power(paths).rx_power == coherent_power(shuffled).rx_power


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30))
def test_triangle_bound(seed, n):
    paths = random_paths(np.random.default_rng(seed), n)
    bound = 20 * math.log10(sum(abs(p.amplitude) for p in paths))
    assert coherent_power(paths).rx_power <= bound + 1e-12


def test_nonfinite_amplitude_rejected():
    with pytest.raises(ValueError):
        coherent_power([make_path(complex("nan"))])


def test_cir_tap_count():
    cir = bin_cir([])
    assert len(cir.taps) == math.ceil(SOUNDER_MAX_EXCESS_DELAY / SOUNDER_BIN_WIDTH) == 2047
    assert not np.any(cir.taps) and cir.dropped == 0


def test_twenty_centimetres_is_one_bin():
    cir = bin_cir([make_path(1e-3, 10.0), make_path(5e-4, 10.2)])
    hit = np.nonzero(cir.taps)[0]
    assert list(hit) == [0, 1]
    assert 0.2 / C0 == pytest.approx(0.667e-9, abs=1e-12)


def test_path_beyond_window_dropped():
    late = 10.0 + 1.4e-6 * C0
    cir = bin_cir([make_path(1e-3, 10.0), make_path(1e-3, late)])
    assert cir.dropped == 1
    assert cir.counts.sum() == 1


def test_cir_energy_conserved_for_distinct_bins():
    paths = [make_path(a, 10.0 + 0.3 * i) for i, a in enumerate([1e-3, 2e-3j, -5e-4, 7e-4 + 1e-4j])]
    cir = bin_cir(paths)
    assert cir.energy() == pytest.approx(sum(abs(p.amplitude) ** 2 for p in paths), rel=1e-9)
    assert cir.first_delay == pytest.approx(10.0 / C0)


def test_cir_same_bin_adds_coherently():
    cir = bin_cir([make_path(1e-3, 10.0), make_path(-1e-3, 10.01)])
    assert cir.taps[0] == 0 and cir.counts[0] == 2


def test_cir_rejects_bad_parameters():
    with pytest.raises(ValueError):
        bin_cir([], bin_width=0.0)
