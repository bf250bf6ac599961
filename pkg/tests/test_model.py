import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfclink.model import (
    DEFAULT_CONVERTER,
    DEFAULT_FILTER_STAGES,
    ConverterParams,
    DetectorModel,
    DomainError,
    FiberLink,
    FilterStage,
    NoiseModel,
    SourceModel,
    TargetBand,
    cascade_insertion_loss_db,
    cascade_isolation_db,
    conversion_efficiency,
    db_to_transmittance,
    fiber_transmittance,
    fidelity_from_snr,
    link_budget,
    scan_fidelity_vs_length,
    scan_snr_vs_pump,
)

OURS = dict(source=SourceModel(32.7e3), converter=0.09, noise=NoiseModel.fixed(154.0),
            detector=DetectorModel(0.9, 54.0))
REF = dict(source=SourceModel(35.5e3), converter=0.17, noise=NoiseModel.fixed(415.0),
           detector=DetectorModel(0.41, 190.0))


def budget(params, length_km, **kw):
    return link_budget(params["source"], params["converter"], params["noise"],
                       FiberLink(length_km, 0.16), params["detector"], **kw)


class TestConversionEfficiency:
    def test_zero_pump(self):
        assert conversion_efficiency(DEFAULT_CONVERTER, 0.0) == 0.0

    def test_operating_point(self):
        # oracle: mpmath at 30 digits
        import mpmath as mp
        mp.mp.dps = 30
        expected = float(mp.mpf("0.1095") * mp.sin(mp.mpf("0.02") * mp.sqrt(mp.mpf(2870) * mp.mpf("1.2"))) ** 2)
        assert conversion_efficiency(DEFAULT_CONVERTER, 1.2) == pytest.approx(expected, rel=1e-12)
        assert conversion_efficiency(DEFAULT_CONVERTER, 1.2) == pytest.approx(0.0932, abs=1e-4)

    def test_peak(self):
        p_opt = (math.pi / (2 * 0.02)) ** 2 / 2.87e3
        assert p_opt == pytest.approx(2.149, abs=1e-3)
        assert DEFAULT_CONVERTER.optimal_pump_power == pytest.approx(p_opt, rel=1e-14)
        assert conversion_efficiency(DEFAULT_CONVERTER, p_opt) == pytest.approx(0.1095, rel=1e-14)

    def test_array_input(self):
        eta = conversion_efficiency(DEFAULT_CONVERTER, [0.0, 1.2])
        assert eta.shape == (2,)

    def test_negative_pump_rejected(self):
        with pytest.raises(DomainError):
            conversion_efficiency(DEFAULT_CONVERTER, -0.1)

    @pytest.mark.parametrize("kw", [dict(waveguide_length=0, alpha_qfc=1, eta_max=0.1),
                                    dict(waveguide_length=1, alpha_qfc=-1, eta_max=0.1),
                                    dict(waveguide_length=1, alpha_qfc=1, eta_max=1.5)])
    def test_param_invariants(self, kw):
        with pytest.raises(DomainError):
            ConverterParams(**kw)

    @settings(max_examples=300)
    @given(L=st.floats(1e-3, 0.1), alpha=st.floats(1.0, 1e5), eta_max=st.floats(0, 1),
           p=st.floats(0, 100))
    def test_bounded_by_eta_max(self, L, alpha, eta_max, p):
        eta = conversion_efficiency(ConverterParams(L, alpha, eta_max), p)
        assert 0.0 <= eta <= eta_max * (1 + 1e-15)


class TestFiber:
    def test_zero_length(self):
        assert fiber_transmittance(FiberLink(0.0, 0.16)) == 1.0

    def test_100km(self):
        assert fiber_transmittance(FiberLink(100.0, 0.16)) == pytest.approx(0.025119, abs=1e-6)
        assert fiber_transmittance(FiberLink(100.0, 0.16)) == pytest.approx(10 ** -1.6, rel=1e-14)

    def test_lab_link_equivalent(self):
        # 1.2 dB between laboratories == 7.5 km at 0.16 dB/km
        assert FiberLink(7.5, 0.16).loss_db == pytest.approx(1.2, rel=1e-14)
        assert fiber_transmittance(FiberLink(7.5, 0.16)) == pytest.approx(0.7586, abs=1e-4)

    def test_negative_length_rejected(self):
        with pytest.raises(DomainError):
            FiberLink(-1.0)

    @given(a=st.floats(0, 200), b=st.floats(0, 200))
    def test_db_linear_duality(self, a, b):
        lhs = db_to_transmittance(a) * db_to_transmittance(b)
        assert lhs == pytest.approx(db_to_transmittance(a + b), rel=1e-12)


class TestFilterCascade:
    def test_empty(self):
        assert cascade_insertion_loss_db([]) == 0.0
        assert cascade_isolation_db([], TargetBand.SPDC_NOISE) == 0.0

    def test_table_sums(self):
        assert cascade_insertion_loss_db(DEFAULT_FILTER_STAGES) == 4.4
        assert cascade_isolation_db(DEFAULT_FILTER_STAGES, "spdc_noise") == 97.6
        assert cascade_isolation_db(DEFAULT_FILTER_STAGES, TargetBand.PUMP) == 66.3

    def test_single_stage(self):
        assert cascade_insertion_loss_db(DEFAULT_FILTER_STAGES[-1:]) == 1.4

    def test_negative_loss_rejected(self):
        with pytest.raises(DomainError):
            FilterStage("bad", 1588, 1, "nm", -0.1, 0, "pump")


class TestFidelityFromSnr:
    def test_zero(self):
        assert fidelity_from_snr(0.0) == 0.25

    @pytest.mark.parametrize("snr, pct", [(12.3, 89.5), (43.9, 96.7), (117.8, 98.7)])
    def test_reported_values(self, snr, pct):
        assert 100 * fidelity_from_snr(snr) == pytest.approx(pct, abs=0.05)

    def test_infinite(self):
        assert fidelity_from_snr(math.inf) == 1.0

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            fidelity_from_snr(-1e-9)

    @given(a=st.floats(0, 1e6), b=st.floats(0, 1e6))
    def test_monotone(self, a, b):
        if a < b:
            assert fidelity_from_snr(a) <= fidelity_from_snr(b)
        assert 0.25 <= fidelity_from_snr(a) < 1.0


class TestLinkBudget:
    @pytest.mark.parametrize("params, length, snr, f_pct", [
        (OURS, 0, 13.74, 90.5), (OURS, 60, 4.19, 75.8), (OURS, 100, 1.16, 52.5),
        (REF, 0, 6.87, 83.1), (REF, 60, 1.30, 54.5), (REF, 100, 0.32, 35.3),
    ])
    def test_close_to_table(self, params, length, snr, f_pct):
        r = budget(params, length)
        # loose check here; exact tolerances live in test_acceptance
        assert r.snr == pytest.approx(snr, abs=0.015)
        assert 100 * r.fidelity == pytest.approx(f_pct, abs=0.1)

    def test_hand_computed_rates(self):
        r = budget(OURS, 0)
        assert r.detected_signal_rate_hz == pytest.approx(32700 * 0.09 * 0.9, rel=1e-14)
        assert r.detected_noise_rate_hz == pytest.approx(154 * 0.9, rel=1e-14)
        assert r.snr == pytest.approx(2648.7 / 192.6, rel=1e-14)

    def test_darks_not_attenuated(self):
        r = budget(OURS, 100)
        assert r.dark_rate_hz == 54.0

    def test_zero_background_sentinel(self):
        r = link_budget(SourceModel(1e4), 0.1, NoiseModel.fixed(0.0), FiberLink(10),
                        DetectorModel(0.9, 0.0))
        assert math.isinf(r.snr) and r.snr_is_infinite
        assert r.fidelity == 1.0

    def test_converter_params_slot(self):
        r = link_budget(SourceModel(32.7e3), DEFAULT_CONVERTER, NoiseModel.fixed(154), FiberLink(0),
                        DetectorModel(0.9, 54), pump_power=1.2)
        assert r.eta_c == conversion_efficiency(DEFAULT_CONVERTER, 1.2)

    def test_converter_params_need_pump(self):
        with pytest.raises(DomainError):
            link_budget(SourceModel(1), DEFAULT_CONVERTER, NoiseModel.fixed(1), FiberLink(0),
                        DetectorModel(0.9, 1))

    @settings(max_examples=300)
    @given(rs=st.floats(0, 1e7), eta_c=st.floats(0, 1), rn=st.floats(0, 1e5),
           eta_d=st.floats(0, 1), rd=st.floats(0, 1e4), length=st.floats(0, 300))
    def test_composition_identity(self, rs, eta_c, rn, eta_d, rd, length):
        r = link_budget(SourceModel(rs), eta_c, NoiseModel.fixed(rn), FiberLink(length),
                        DetectorModel(eta_d, rd))
        if r.detected_noise_rate_hz + r.dark_rate_hz == 0:
            assert r.fidelity == 1.0
            return
        assert r.snr >= 0
        assert 0.25 <= r.fidelity <= 1.0
        assert fidelity_from_snr(r.snr) == pytest.approx(r.fidelity, rel=1e-12)

    @given(l1=st.floats(0, 300), l2=st.floats(0, 300))
    def test_fidelity_decreases_with_length(self, l1, l2):
        if l1 < l2:
            assert budget(OURS, l1).fidelity >= budget(OURS, l2).fidelity

    def test_duty_cycle_invariant(self):
        with pytest.raises(DomainError):
            SourceModel(1.0, rep_rate_hz=1e6, pulse_width_s=2e-6)
        assert SourceModel(1.0).duty_cycle == pytest.approx(0.3)


class TestScans:
    def test_single_point_pump_grid(self):
        scan = scan_snr_vs_pump(SourceModel(32.7e3), 0.09, NoiseModel.linear(100.0), FiberLink(0),
                                DetectorModel(0.9, 54), [1.2])
        assert scan.best_pump_w == 1.2
        direct = link_budget(SourceModel(32.7e3), 0.09, NoiseModel.linear(100.0), FiberLink(0),
                             DetectorModel(0.9, 54), pump_power=1.2)
        assert scan.snr[0] == direct.snr

    def test_pump_scan_operating_point_and_rollover(self):
        source = SourceModel(32.7e3)
        link = FiberLink(7.5, 0.16)
        det = DetectorModel(0.9, 54.0)
        noise = NoiseModel.linear(154.0 / 1.2)
        grid = np.linspace(0.0, 4.0, 81)
        scan = scan_snr_vs_pump(source, DEFAULT_CONVERTER, noise, link, det, grid)
        # independent hand evaluation at 1.2 W
        eta_c = 0.1095 * math.sin(0.02 * math.sqrt(2870 * 1.2)) ** 2
        eta_l = 10 ** (-0.12)
        oracle = 32700 * eta_c * eta_l * 0.9 / (154.0 * eta_l * 0.9 + 54.0)
        i = int(np.argmin(abs(grid - 1.2)))
        assert scan.snr[i] == pytest.approx(oracle, rel=1e-12)
        assert scan.snr[i] == pytest.approx(13.06, abs=0.01)
        # beyond the efficiency peak the SNR only falls
        beyond = grid > DEFAULT_CONVERTER.optimal_pump_power
        assert np.all(np.diff(scan.snr[beyond]) < 0)
        assert scan.best_snr == scan.snr.max()

    def test_fixed_efficiency_between_laboratories(self):
        # with the rounded 9 % efficiency instead of the curve value the same link gives 12.6
        r = link_budget(SourceModel(32.7e3), 0.09, NoiseModel.fixed(154.0), FiberLink(7.5, 0.16),
                        DetectorModel(0.9, 54.0))
        assert r.snr == pytest.approx(12.63, abs=0.01)

    def test_zero_noise_pump_scan_infinite(self):
        scan = scan_snr_vs_pump(SourceModel(1e4), DEFAULT_CONVERTER, NoiseModel.linear(0.0),
                                FiberLink(0), DetectorModel(0.9, 0.0), [0.5, 1.0, 2.0])
        assert np.all(np.isinf(scan.snr))

    def test_empty_grid(self):
        with pytest.raises(DomainError):
            scan_snr_vs_pump(SourceModel(1), 0.1, NoiseModel.linear(1), FiberLink(0),
                             DetectorModel(1, 1), [])
        with pytest.raises(DomainError):
            scan_fidelity_vs_length(SourceModel(1), 0.1, NoiseModel.fixed(1), FiberLink(0),
                                    DetectorModel(1, 1), [])

    def test_length_scan_matches_budget_at_zero(self):
        scan = scan_fidelity_vs_length(OURS["source"], 0.09, OURS["noise"], FiberLink(0),
                                       OURS["detector"], [0.0, 50.0, 100.0])
        assert scan.fidelity[0] == budget(OURS, 0).fidelity
        assert np.all(np.diff(scan.fidelity) < 0)

    @pytest.mark.parametrize("params, rs, f_pct", [(OURS, 118.0e3, 75.7), (REF, 118.0e3, 51.0),
                                                  (OURS, 327.7e3, 89.0)])
    def test_length_scan_100km(self, params, rs, f_pct):
        scan = scan_fidelity_vs_length(SourceModel(rs), params["converter"], params["noise"],
                                       FiberLink(0), params["detector"], [100.0])
        assert 100 * scan.fidelity[0] == pytest.approx(f_pct, abs=0.1)
