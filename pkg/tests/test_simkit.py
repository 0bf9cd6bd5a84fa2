"""Harness behavior: determinism, stopping, statistics, and file formats."""

from dataclasses import replace

import numpy as np
import pytest

from smdiv.channel import substream
from smdiv.codebooks import Scheme, codeword_table, label_index, make_config
from smdiv import decoders
from smdiv.simkit import (
    PointResult,
    PRESETS,
    SchemeRun,
    SimConfig,
    SimResult,
    _ciod_chunk,
    _draw_block,
    _exhaustive_batch,
    _mrc_batch,
    _sm_chunk,
    _transmit_ciod,
    check_monotone,
    estimate_diversity_slope,
    parse_scheme_token,
    read_config_file,
    run_ser_sweep,
    sim_config_from_options,
    verify_decoders,
    wilson_interval,
    write_csv,
)


def _sim(**kw):
    defaults = dict(
        runs=(parse_scheme_token("low-dosm:qam4", 4),),
        n_r=2,
        snr_db=(0.0, 4.0, 8.0),
        min_errors=50,
        max_trials=20_000,
        master_seed=11,
        chunk_size=4096,
    )
    defaults.update(kw)
    return SimConfig(**defaults)


class TestWilson:
    def test_extremes(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and hi < 0.05
        lo, hi = wilson_interval(100, 100)
        assert hi == 1.0 and lo > 0.95

    def test_contains_point_estimate(self):
        for k, n in [(3, 50), (40, 1000), (999, 1000)]:
            lo, hi = wilson_interval(k, n)
            assert lo < k / n < hi


class TestSlope:
    def test_synthetic_unit_slope(self):
        pts = [PointResult(scheme="x", decoder="mrc", nt=4, nr=1, m=4, bpcu=3,
                           snr_db=snr, trials=10 ** 6,
                           errors=int(10 ** 6 * 10 ** (-snr / 10)),
                           bit_errors=0, seed=0)
               for snr in (10, 20, 30)]
        result = SimResult(points=pts, master_seed=0, config_digest="")
        slope = estimate_diversity_slope(result, "x", (10, 30))
        assert slope == pytest.approx(-1.0, abs=1e-9)

    def test_needs_two_points(self):
        result = SimResult(points=[], master_seed=0, config_digest="")
        with pytest.raises(ValueError):
            estimate_diversity_slope(result, "x", (0, 10))


class TestEngineMatchesReference:
    """The vectorized chunk decoders and the per-trial detectors must agree."""

    @pytest.mark.parametrize("scheme,mod,batch", [
        (Scheme.LOW_DOSM, "qam4", "mrc"),
        (Scheme.LOW_DOSM, "qam16", "exhaustive"),
        (Scheme.HIGH_DOSM, "bpsk", "mrc"),
        (Scheme.HIGH_DOSM, "qam4", "mrc"),
    ], ids=["low4-mrc", "low16-exh", "high2-mrc", "high4-mrc"])
    def test_batch_equals_oracle(self, scheme, mod, batch):
        cfg = make_config(scheme, 4, mod)
        rng = substream(77, 0)
        n = 600
        labels, h, noise = _draw_block(cfg, 2, 0.1, rng, n)
        table = codeword_table(cfg)
        y1, y2 = _transmit_ciod(cfg, table, labels, h, noise, n)
        decided = (_mrc_batch(cfg, h, y1, y2) if batch == "mrc"
                   else _exhaustive_batch(cfg, h, y1, y2))
        ties = 0
        for t in range(n):
            y = np.stack([y1[t], y2[t]], axis=1)
            metrics = decoders.exhaustive_metrics(y, h[t], cfg)
            order = np.argsort(metrics)
            if metrics[order[1]] - metrics[order[0]] < 1e-9:
                ties += 1
                continue
            assert decided[t] == int(order[0])
        assert ties < n // 10

    def test_sm_batch_equals_reference(self):
        cfg = make_config(Scheme.SM, 4, "qam4")
        rng = substream(78, 0)
        n = 600
        sigma2 = 0.1
        labels, decided = _sm_chunk(cfg, 2, sigma2, rng, n)
        rng2 = substream(78, 0)
        labels2, h, noise = _draw_block(cfg, 2, sigma2, rng2, n)
        np.testing.assert_array_equal(labels, labels2)
        table = codeword_table(cfg)
        idx = np.arange(n)
        y = h[idx, :, table.rows1[labels2] - 1] * table.syms1[labels2][:, None] \
            + noise[:, :, 0]
        for t in range(n):
            ref = decoders.ml_sm_decode(y[t], h[t], cfg)
            assert label_index(ref.label, cfg) == decided[t]

    def test_qr_chunk_path_runs(self):
        cfg = make_config(Scheme.LOW_DOSM, 4, "qam4")
        rng = substream(79, 0)
        labels, decided = _ciod_chunk(cfg, "qr", 2, 0.05, rng, 64)
        assert decided.shape == labels.shape


class TestSweep:
    def test_noiseless_limit_has_zero_errors(self):
        sim = _sim(snr_db=(60.0,), min_errors=10, max_trials=10_000)
        result = run_ser_sweep(sim)
        point = result.points[0]
        assert point.errors == 0 and point.trials == 10_000

    def test_worker_count_does_not_change_results(self):
        sim = _sim()
        a = run_ser_sweep(sim)
        b = run_ser_sweep(replace(sim, workers=3))
        for pa, pb in zip(a.points, b.points):
            assert (pa.trials, pa.errors, pa.bit_errors) == (pb.trials, pb.errors, pb.bit_errors)

    def test_stops_on_error_budget(self):
        sim = _sim(snr_db=(0.0,), min_errors=50, max_trials=100_000, chunk_size=512)
        point = run_ser_sweep(sim).points[0]
        assert point.errors >= 50
        assert point.trials < 100_000

    def test_decoder_choice_same_decisions(self):
        base = _sim(snr_db=(6.0,), min_errors=20, max_trials=8192)
        a = run_ser_sweep(base).points[0]
        runs = (SchemeRun(cfg=base.runs[0].cfg, decoder="exhaustive"),)
        b = run_ser_sweep(replace(base, runs=runs)).points[0]
        assert (a.trials, a.errors) == (b.trials, b.errors)

    def test_ser_monotone_in_snr(self):
        sim = _sim(snr_db=(0.0, 2.0, 4.0, 6.0, 8.0, 10.0), min_errors=100,
                   max_trials=50_000)
        result = run_ser_sweep(sim)
        assert check_monotone(result.points)

    def test_wilson_covers_doubled_budget_rerun(self):
        # fixed trial budgets so the rerun really is a doubled sample
        snrs = tuple(float(s) for s in range(0, 12))
        sim = _sim(snr_db=snrs, min_errors=10 ** 6, max_trials=8192,
                   master_seed=7, chunk_size=8192)
        first = run_ser_sweep(sim)
        rerun = run_ser_sweep(replace(sim, max_trials=16384, master_seed=1007))
        covered = 0
        for a, b in zip(first.points, rerun.points):
            lo, hi = a.ci
            covered += lo <= b.ser <= hi
        assert covered >= 0.9 * len(snrs)

    def test_bit_error_diagnostics_present(self):
        sim = _sim(snr_db=(4.0,), min_errors=20, max_trials=8192)
        point = run_ser_sweep(sim).points[0]
        assert point.bit_errors >= point.errors
        assert 0 < point.ber < 1


class TestVerifyDecoders:
    def test_agreement_report(self):
        cfg = make_config(Scheme.LOW_DOSM, 4, "qam4")
        report = verify_decoders(cfg, n_r=2, snr_db=10, trials=500, seed=3)
        assert report.ok
        assert report.trials == 500
        assert report.ties_excluded < 10

    def test_rejects_single_use_scheme(self):
        with pytest.raises(ValueError):
            verify_decoders(make_config(Scheme.SM, 4, "bpsk"), 2, 10, 10, 0)


class TestConfigParsing:
    def test_file_format(self, tmp_path):
        path = tmp_path / "sweep.cfg"
        path.write_text(
            "# comparison at 3 bpcu\n"
            "schemes = sm:bpsk, low-dosm:qam4\n"
            "nt = 4\n"
            "nr = 2          # receive antennas\n"
            "snr_db = 0,2,4\n"
            "min_errors = 25\n"
            "max_trials = 4096\n"
            "master_seed = 9\n"
        )
        opts = read_config_file(path)
        sim = sim_config_from_options(opts)
        assert [r.name for r in sim.runs] == ["sm:bpsk", "low-dosm:qam4"]
        assert sim.snr_db == (0.0, 2.0, 4.0)
        assert sim.min_errors == 25

    def test_cli_overrides_file(self, tmp_path):
        path = tmp_path / "sweep.cfg"
        path.write_text("schemes = sm:bpsk\nnr = 2\nmaster_seed = 9\n")
        opts = read_config_file(path)
        opts["nr"] = "1"
        sim = sim_config_from_options(opts)
        assert sim.n_r == 1

    def test_bad_lines_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("just a line\n")
        with pytest.raises(ValueError):
            read_config_file(path)

    def test_presets(self):
        sim = sim_config_from_options({"preset": "3bpcu", "max_trials": "4096",
                                       "min_errors": "10"})
        assert [r.name for r in sim.runs] == list(PRESETS["3bpcu"])
        assert all(r.cfg.block_bits / r.cfg.channel_uses == 3.0 for r in sim.runs)
        sim4 = sim_config_from_options({"preset": "4bpcu", "max_trials": "4096",
                                        "min_errors": "10"})
        assert all(r.cfg.block_bits / r.cfg.channel_uses == 4.0 for r in sim4.runs)

    def test_bad_tokens(self):
        with pytest.raises(ValueError):
            parse_scheme_token("alamouti:qam4", 4)
        with pytest.raises(ValueError):
            sim_config_from_options({"schemes": ""})

    def test_validation(self):
        with pytest.raises(ValueError):
            _sim(min_errors=5)
        with pytest.raises(ValueError):
            _sim(snr_db=())
        from smdiv.constellation import Normalization

        half = parse_scheme_token("low-dosm:qam4", 4)
        bad = SchemeRun(cfg=make_config(Scheme.LOW_DOSM, 4, "qam4",
                                        Normalization.UNIT_HALF_SPACING),
                        decoder="mrc")
        with pytest.raises(ValueError):
            _sim(runs=(bad,))
        with pytest.raises(ValueError):
            _sim(runs=(replace(half, decoder="sphere"),))


class TestCsv:
    def test_exact_column_order(self, tmp_path):
        sim = _sim(snr_db=(4.0,), min_errors=10, max_trials=4096)
        result = run_ser_sweep(sim)
        path = tmp_path / "out.csv"
        write_csv(result, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ("scheme,decoder,nt,nr,m,bpcu,snr_db,trials,errors,"
                            "ser,ci_low,ci_high,seed")
        assert lines[1].startswith("low-dosm:qam4,mrc,4,2,4,3,4,")

    def test_rerun_is_byte_identical(self, tmp_path):
        sim = _sim(min_errors=20, max_trials=8192)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(run_ser_sweep(sim), p1)
        write_csv(run_ser_sweep(replace(sim, workers=2)), p2)
        assert p1.read_bytes() == p2.read_bytes()
