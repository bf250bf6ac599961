import math

import numpy as np
import pytest

from qfclink.model import DomainError, SourceModel
from qfclink.montecarlo import (
    GateConfig,
    Origin,
    cw_to_in_gate,
    expected_gated_snr,
    fold_histogram,
    gate_counts,
    gated_snr,
    generate_stream,
    in_gate_to_cw,
    read_timetags,
    write_timetags,
)

SOURCE = SourceModel(32.7e3)
GATE = GateConfig()


def test_gate_defaults_match_source():
    assert GateConfig.for_source(SOURCE) == GATE
    assert GATE.gate_fraction == pytest.approx(0.3)


@pytest.mark.parametrize("kw", [
    dict(signal_width_ns=300, noise_width_ns=200),
    dict(noise_offset_ns=200),
    dict(noise_offset_ns=800),
])
def test_gate_invariants(kw):
    with pytest.raises(DomainError):
        GateConfig(**kw)


def test_rate_conventions_roundtrip():
    assert cw_to_in_gate(in_gate_to_cw(192.6, GATE), GATE) == pytest.approx(192.6, rel=1e-15)
    assert in_gate_to_cw(192.6, GATE) == pytest.approx(642.0)


class TestGenerate:
    def test_all_zero(self):
        s = generate_stream(SOURCE, 0, 0, 0, 1.0, 0)
        assert len(s) == 0

    def test_signal_only_inside_pulses(self):
        s = generate_stream(SOURCE, 5e4, 0, 0, 2.0, 1)
        assert len(s) > 0
        phase = s.timestamps_ns % 1000
        assert np.all(phase < 300)
        assert np.all(s.origins == Origin.SIGNAL)

    def test_sorted_and_in_range(self):
        s = generate_stream(SOURCE, 2600, 150, 54, 5.0, 2)
        assert np.all(np.diff(s.timestamps_ns) >= 0)
        assert s.timestamps_ns[0] >= 0 and s.timestamps_ns[-1] < s.duration_ns

    def test_total_count_poisson(self):
        s = generate_stream(SOURCE, 2600, 150, 54, 60.0, 3)
        mean = 60 * (2600 + 150 + 54)
        assert abs(len(s) - mean) < 5 * math.sqrt(mean)
        for origin, rate in ((Origin.SIGNAL, 2600), (Origin.NOISE, 150), (Origin.DARK, 54)):
            m = 60 * rate
            assert abs(s.count(origin) - m) < 5 * math.sqrt(m)

    def test_deterministic(self):
        a = generate_stream(SOURCE, 2600, 150, 54, 3.0, 11)
        b = generate_stream(SOURCE, 2600, 150, 54, 3.0, 11)
        assert np.array_equal(a.timestamps_ns, b.timestamps_ns)
        assert np.array_equal(a.origins, b.origins)

    def test_partial_period(self):
        # 1.5 us run: one full pulse plus half a period after it (pulse already over)
        s = generate_stream(SOURCE, 1e9, 0, 0, 1.5e-6, 0)
        assert np.all(s.timestamps_ns % 1000 < 300)

    def test_bad_inputs(self):
        with pytest.raises(DomainError):
            generate_stream(SOURCE, -1, 0, 0, 1.0, 0)
        with pytest.raises(DomainError):
            generate_stream(SOURCE, 1, 0, 0, 0.0, 0)


class TestHistogram:
    def test_empty(self):
        h = fold_histogram(np.empty(0, dtype=np.int64), GATE)
        assert h.counts.shape == (100,) and h.counts.sum() == 0

    def test_single_tag(self):
        h = fold_histogram(np.array([5135]), GATE)
        assert h.counts[13] == 1 and h.counts.sum() == 1

    def test_non_dividing_bin(self):
        with pytest.raises(DomainError):
            fold_histogram(np.array([1]), GateConfig(bin_ns=7))

    def test_signal_only_bins(self):
        s = generate_stream(SOURCE, 1e4, 0, 0, 1.0, 4)
        h = fold_histogram(s, GATE)
        assert h.counts[30:].sum() == 0
        assert h.counts.sum() == len(s)

    def test_mass_conservation(self):
        s = generate_stream(SOURCE, 2600, 150, 54, 2.0, 5)
        assert fold_histogram(s, GATE).counts.sum() == len(s)


class TestGatedSnr:
    def test_noise_free_sentinel(self):
        s = generate_stream(SOURCE, 1e4, 0, 0, 0.5, 6)
        with pytest.warns(RuntimeWarning):
            r = gated_snr(s, GATE)
        assert r.infinite and math.isinf(r.snr) and r.k_s > 0 and r.k_n == 0

    def test_definition(self):
        # two tags in the signal gate, one in the noise gate
        r = gated_snr(np.array([10, 1020, 2600]), GATE)
        assert (r.k_s, r.k_n, r.snr) == (2, 1, 1.0)

    def test_expected_limit(self):
        assert expected_gated_snr(2648.7, 642.0, GATE) == pytest.approx(2648.7 / 192.6)
        assert math.isinf(expected_gated_snr(1.0, 0.0, GATE))

    @pytest.mark.slow
    def test_convergence_over_seeds(self):
        r_s, r_n, r_d = 2000.0, 300.0, 100.0  # CW background
        target = r_s / ((r_n + r_d) * 300e-9 * 1e6)
        est, ses = [], []
        for seed in range(20):
            s = generate_stream(SOURCE, r_s, r_n, r_d, 100.0, seed)
            g = gated_snr(s, GATE)
            est.append(g.snr)
            ses.append(g.std_error)
            assert abs(g.snr - target) < 3 * g.std_error
        assert abs(np.mean(est) - target) < 3 * np.mean(ses) / math.sqrt(len(est))

    def test_swapping_background_gate(self):
        s = generate_stream(SOURCE, 2000, 300, 100, 50.0, 21)
        a = gated_snr(s, GATE)
        b = gated_snr(s, GateConfig(noise_offset_ns=650))
        assert abs(a.snr - b.snr) < 3 * max(a.std_error, b.std_error)

    def test_deterministic(self):
        a = gated_snr(generate_stream(SOURCE, 2600, 150, 54, 3.0, 9), GATE)
        b = gated_snr(generate_stream(SOURCE, 2600, 150, 54, 3.0, 9), GATE)
        assert a == b


class TestTimetagFile:
    def test_roundtrip(self, tmp_path):
        s = generate_stream(SOURCE, 2600, 150, 54, 0.2, 12)
        p = tmp_path / "run.tt"
        write_timetags(p, s)
        text = p.read_text().splitlines()
        assert text[0] == "# timetag v1 rep_period_ns=1000"
        assert all(line.endswith("\t0") for line in text[1:])
        ts, period = read_timetags(p)
        assert period == 1000
        assert np.array_equal(ts, s.timestamps_ns)
        assert gate_counts(ts, GATE) == gate_counts(s, GATE)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.tt"
        p.write_text("0\t0\n")
        with pytest.raises(ValueError):
            read_timetags(p)

    def test_unsorted(self, tmp_path):
        p = tmp_path / "bad.tt"
        p.write_text("# timetag v1 rep_period_ns=1000\n5\t0\n3\t0\n")
        with pytest.raises(ValueError):
            read_timetags(p)
