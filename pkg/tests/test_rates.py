import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdmimo.rates import (
    MRT,
    RICH,
    ZF,
    ClusterCatalog,
    beam_gain,
    build_catalog,
    enumerate_candidates,
    mrt_peak_rate,
    zf_peak_rate,
)
from hdmimo.topology import build_checkerboard, compute_link_gains, desk_config, make_gains


def single(beta=1.0, M=100, S=10, noise=1.0, extra_rx=None):
    b = [beta] + ([] if extra_rx is None else [extra_rx])
    return make_gains([b], 1.0, M, [[S, 2 * S]] * len(b), noise)


class TestBeamGain:
    @pytest.mark.parametrize("M,S,b", [(100, 10, 9.1), (100, 20, 4.05), (40, 40, 1 / 40)])
    def test_values(self, M, S, b):
        assert beam_gain(M, S) == pytest.approx(b)

    @pytest.mark.parametrize("S", [0, 101])
    def test_rejects(self, S):
        with pytest.raises(ValueError):
            beam_gain(100, S)


class TestZf:
    def test_single_bs(self):
        assert zf_peak_rate(0, (0,), single()) == pytest.approx(np.log2(10.1), abs=1e-4)
        assert zf_peak_rate(0, (0,), single()) == pytest.approx(3.3363, abs=1e-4)

    def test_symmetric_pair(self):
        g = make_gains([[1.0, 1.0]], 1.0, 100, [[10, 20], [10, 20]], 1.0)
        assert zf_peak_rate(0, (0, 1), g) == pytest.approx(4.1043, abs=1e-4)

    def test_zero_gain(self):
        g = make_gains([[0.0, 1.0]], 1.0, 100, [[10, 20]] * 2, 1.0)
        assert zf_peak_rate(0, (0,), g) == 0.0

    def test_far_bs_lowers_rate(self):
        # adding a BS with beta ~ 0 removes nothing from interference but the
        # larger S(2) shrinks the near BS's beam gain
        g = make_gains([[1.0, 1e-12]], 1.0, 100, [[10, 20]] * 2, 1e-3)
        assert zf_peak_rate(0, (0, 1), g) < zf_peak_rate(0, (0,), g)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(1e-3, 10.0), min_size=3, max_size=3), st.floats(1.01, 5.0))
    def test_monotone_in_cluster_gain(self, beta, f):
        g = make_gains([beta], 1.0, 64, [[4, 8]] * 3, 0.5)
        r0 = zf_peak_rate(0, (0, 1), g)
        up = list(beta)
        up[0] *= f
        assert zf_peak_rate(0, (0, 1), g.with_beta(np.array([up]))) >= r0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(1e-3, 10.0), min_size=3, max_size=3), st.floats(1.01, 5.0),
           st.sampled_from([ZF, MRT]))
    def test_interference_monotone(self, beta, f, precoder):
        g = make_gains([beta], 1.0, 64, [[4, 8]] * 3, 0.5)
        rate = zf_peak_rate if precoder == ZF else mrt_peak_rate
        r0 = rate(0, (0, 1), g)
        up = list(beta)
        up[2] *= f
        assert rate(0, (0, 1), g.with_beta(np.array([up]))) <= r0

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-3, 1e3), st.sampled_from([ZF, MRT]))
    def test_scale_invariance(self, c, precoder):
        rate = zf_peak_rate if precoder == ZF else mrt_peak_rate
        g = make_gains([[0.7, 0.2, 0.05]], [2.0, 1.0, 1.0], 64, [[4, 8]] * 3, 0.3)
        h = make_gains([[0.7, 0.2, 0.05]], [2.0 * c, c, c], 64, [[4, 8]] * 3, 0.3 * c)
        for C in [(0,), (0, 1)]:
            assert rate(0, C, h) == pytest.approx(rate(0, C, g), rel=1e-10)


class TestMrt:
    def test_single_bs(self):
        assert mrt_peak_rate(0, (0,), single()) == pytest.approx(2.6469, abs=1e-4)

    def test_with_interferer(self):
        assert mrt_peak_rate(0, (0,), single(extra_rx=1.0)) == pytest.approx(2.1532, abs=1e-4)

    def test_zero_gain(self):
        assert mrt_peak_rate(0, (0,), single(beta=0.0)) == 0.0

    def test_zf_beats_mrt_single_bs(self):
        assert zf_peak_rate(0, (0,), single()) > mrt_peak_rate(0, (0,), single())


class TestCandidates:
    def test_strongest(self):
        g = make_gains([[5.0, 3.0, 1.0]], 1.0, 10, [[1, 2]] * 3)
        assert enumerate_candidates(0, g, 2)[2] == [(0, 1)]

    def test_rich(self):
        g = make_gains([[5.0, 3.0, 1.0]], 1.0, 10, [[1, 2]] * 3)
        assert enumerate_candidates(0, g, 2, n_strongest=3, mode=RICH)[2] == [(0, 1), (0, 2), (1, 2)]

    def test_too_few_bs(self):
        g = make_gains([[5.0]], 1.0, 10, [[1, 2]])
        assert enumerate_candidates(0, g, 2)[2] == []

    def test_ranks_by_received_power(self):
        g = make_gains([[1.0, 3.0]], [10.0, 1.0], 10, [[1, 2]] * 2)
        assert enumerate_candidates(0, g, 1)[1] == [(0,)]

    def test_n_strongest_below_lmax(self):
        g = make_gains([[5.0, 3.0, 1.0]], 1.0, 10, [[1, 2]] * 3)
        with pytest.raises(ValueError):
            enumerate_candidates(0, g, 2, n_strongest=1, mode=RICH)


@pytest.fixture(scope="module")
def gains():
    bss, users = build_checkerboard(desk_config(), seed=5)
    return compute_link_gains(bss, users, 1000.0)


class TestCatalog:
    def test_invariants(self, gains):
        cat = build_catalog(gains, ZF, 3, RICH, 4)
        rates = np.array(list(cat.entries.values()))
        assert np.all(np.isfinite(rates)) and np.all(rates >= 0)
        for (k, L), cs in cat.candidates.items():
            assert len(set(cs)) == len(cs)
            assert all(len(C) == L for C in cs)
        referenced = {(k, C) for (k, L), cs in cat.candidates.items() for C in cs}
        assert referenced == set(cat.entries)

    def test_lmax1_is_cellular(self, gains):
        cat = build_catalog(gains, ZF, 1)
        rx = gains.received_power()
        for k in range(gains.n_users):
            j = int(np.argmax(rx[k]))
            assert cat.clusters(k, 1) == [(j,)]
            assert cat.rate(k, (j,)) == zf_peak_rate(k, (j,), gains)

    def test_strongest_count(self, gains):
        cat = build_catalog(gains, ZF, 4)
        assert len(cat.entries) == 4 * gains.n_users

    def test_csv_roundtrip(self, gains, tmp_path):
        cat = build_catalog(gains, MRT, 2)
        cat.to_csv(tmp_path / "c.csv")
        back = ClusterCatalog.from_csv(tmp_path / "c.csv", precoder=MRT)
        assert back.entries == cat.entries
        assert (tmp_path / "c.csv").read_text().splitlines()[0] == "user_id,cluster_members,L,rate_bps_hz"

    def test_restrict(self, gains):
        cat = build_catalog(gains, ZF, 3)
        r = cat.restrict(1)
        assert r.l_max == 1 and all(len(C) == 1 for _, C in r.entries)
