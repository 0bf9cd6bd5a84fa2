"""Monte Carlo symbol-error-rate harness.

Trials are simulated in fixed-size chunks, each driven by an RNG substream
keyed by (master seed, scheme, SNR point, chunk index) and decoded with a
vectorized batch engine.  Chunks are consumed strictly in index order and a
point stops at the first chunk boundary where the error or trial budget is
met, so results are byte-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import snr_to_sigma2, substream
from .codebooks import (
    Scheme,
    SchemeConfig,
    codeword_table,
    label_index,
    legitimate_pairs,
    make_config,
    rate_bpcu,
)
from .constellation import Kind, Normalization
from . import decoders

_WILSON_Z = 1.959963984540054  # two-sided 95%


def wilson_interval(errors: int, trials: int, z: float = _WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == trials else min(1.0, center + half)
    return lo, hi


def modulation_name(cfg: SchemeConfig) -> str:
    kind = cfg.constellation.kind
    if kind is Kind.BPSK:
        return "bpsk"
    prefix = "qam" if kind is Kind.SQUARE_QAM else "rect"
    return f"{prefix}{cfg.m}"


@dataclass(frozen=True)
class SchemeRun:
    """One curve of the sweep: a scheme configuration plus its decoder."""

    cfg: SchemeConfig
    decoder: str = "mrc"

    @property
    def name(self) -> str:
        return f"{self.cfg.scheme.value}:{modulation_name(self.cfg)}"


@dataclass(frozen=True)
class SimConfig:
    runs: tuple[SchemeRun, ...]
    n_r: int
    snr_db: tuple[float, ...]
    min_errors: int = 100
    max_trials: int = 1_000_000
    master_seed: int = 12345
    workers: int = 1
    chunk_size: int = 65536

    def __post_init__(self):
        if not self.runs:
            raise ValueError("need at least one scheme to simulate")
        if not self.snr_db:
            raise ValueError("need at least one SNR point")
        # Keep at least ten errors per reported point so an SER of 1e-t is
        # always backed by >= 10**(t+1) trials.
        if self.min_errors < 10:
            raise ValueError("min_errors below 10 undermines the trial floor")
        if self.max_trials < 1 or self.chunk_size < 1 or self.workers < 1:
            raise ValueError("budgets and worker count must be positive")
        for run in self.runs:
            if abs(run.cfg.constellation.average_energy() - 1.0) > 1e-9:
                raise ValueError("SER sweeps require unit-average-energy signal sets")
            if run.decoder not in ("mrc", "exhaustive", "qr"):
                raise ValueError(f"unknown decoder {run.decoder!r}")


@dataclass(frozen=True)
class PointResult:
    scheme: str
    decoder: str
    nt: int
    nr: int
    m: int
    bpcu: float
    snr_db: float
    trials: int
    errors: int
    bit_errors: int
    seed: int

    @property
    def ser(self) -> float:
        return self.errors / self.trials if self.trials else 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.trials * max(1, round(self.bpcu * 2))) if self.trials else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.errors, self.trials)


@dataclass
class SimResult:
    points: list[PointResult]
    master_seed: int
    config_digest: str

    def scheme_points(self, scheme: str) -> list[PointResult]:
        return [p for p in self.points if p.scheme == scheme]


def _config_digest(sim: SimConfig) -> str:
    return hashlib.sha256(repr(sim).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Batch decoding engine


def _popcounts(values: np.ndarray, width: int) -> int:
    total = 0
    v = values.copy()
    for _ in range(width):
        total += int((v & 1).sum())
        v >>= 1
    return total


def _draw_block(cfg: SchemeConfig, n_r: int, sigma2: float,
                rng: np.random.Generator, n: int):
    labels = rng.integers(0, cfg.n_codewords, size=n)
    h = (rng.standard_normal((n, n_r, cfg.n_antennas))
         + 1j * rng.standard_normal((n, n_r, cfg.n_antennas))) * np.sqrt(0.5)
    noise = (rng.standard_normal((n, n_r, cfg.channel_uses))
             + 1j * rng.standard_normal((n, n_r, cfg.channel_uses))) * np.sqrt(sigma2)
    return labels, h, noise


def _sliced_argmin(metric_fn, n_rows: int, n_cand: int, slice_size: int):
    """Argmin over a candidate axis evaluated in slices to bound memory."""
    best = np.full(n_rows, np.inf)
    best_idx = np.zeros(n_rows, dtype=np.int64)
    for c0 in range(0, n_cand, slice_size):
        sl = slice(c0, min(c0 + slice_size, n_cand))
        m = metric_fn(sl)
        k = np.argmin(m, axis=1)
        v = np.take_along_axis(m, k[:, None], axis=1)[:, 0]
        better = v < best
        best_idx[better] = k[better] + c0
        best[better] = v[better]
    return best_idx, best


def _sm_chunk(cfg: SchemeConfig, n_r: int, sigma2: float,
              rng: np.random.Generator, n: int):
    table = codeword_table(cfg)
    labels, h, noise = _draw_block(cfg, n_r, sigma2, rng, n)
    idx = np.arange(n)
    y = h[idx, :, table.rows1[labels] - 1] * table.syms1[labels][:, None] + noise[:, :, 0]

    def metrics(sl):
        cand = h[:, :, table.rows1[sl] - 1] * table.syms1[sl][None, None, :]
        return (np.abs(y[:, :, None] - cand) ** 2).sum(axis=1)

    slice_size = max(1, (1 << 22) // max(1, n * n_r))
    decided, _ = _sliced_argmin(metrics, n, cfg.n_codewords, slice_size)
    return labels, decided


def _transmit_ciod(cfg, table, labels, h, noise, n):
    idx = np.arange(n)
    y1 = h[idx, :, table.rows1[labels] - 1] * table.syms1[labels][:, None] + noise[:, :, 0]
    y2 = h[idx, :, table.rows2[labels] - 1] * table.syms2[labels][:, None] + noise[:, :, 1]
    return y1, y2


def _mrc_batch(cfg: SchemeConfig, h, y1, y2):
    """Vectorized pair-combining decoder; returns decoded label indices.

    Works with metrics shifted by the pair-independent received energy, so
    decisions match the per-trial reference decoder except on floating-point
    near-ties.
    """
    pts = cfg.constellation.array
    m = pts.size
    s_re2, s_im2 = (pts.real ** 2)[None, :], (pts.imag ** 2)[None, :]
    s_re, s_im = pts.real[None, :], pts.imag[None, :]
    gains = (np.abs(h) ** 2).sum(axis=1)
    comb1 = np.einsum("bra,br->ba", np.conj(h), y1)
    comb2 = np.einsum("bra,br->ba", np.conj(h), y2)
    pair_j = []
    pair_k1 = []
    pair_k2 = []
    for l1, l2, phase in legitimate_pairs(cfg):
        a = gains[:, l1 - 1]
        b = gains[:, l2 - 1]
        yh1 = np.conj(phase) * comb1[:, l1 - 1]
        yh2 = np.conj(phase) * comb2[:, l2 - 1]
        t1i, t1q = yh1.real, yh2.imag
        t2i, t2q = yh2.real, yh1.imag
        # Per-symbol metrics up to symbol-independent terms and an a*b factor.
        q1 = (a[:, None] * s_re2 - 2 * t1i[:, None] * s_re
              + b[:, None] * s_im2 - 2 * t1q[:, None] * s_im)
        q2 = (b[:, None] * s_re2 - 2 * t2i[:, None] * s_re
              + a[:, None] * s_im2 - 2 * t2q[:, None] * s_im)
        k1 = np.argmin(q1, axis=1)
        k2 = np.argmin(q2, axis=1)
        st1 = pts.real[k1] + 1j * pts.imag[k2]
        st2 = pts.real[k2] + 1j * pts.imag[k1]
        # Pair metric shifted by the received energy (common to all pairs).
        j = (a * np.abs(st1) ** 2 - 2 * (np.conj(st1) * yh1).real
             + b * np.abs(st2) ** 2 - 2 * (np.conj(st2) * yh2).real)
        pair_j.append(j)
        pair_k1.append(k1)
        pair_k2.append(k2)
    j_all = np.stack(pair_j, axis=1)
    best = np.argmin(j_all, axis=1)
    rows = np.arange(best.size)
    k1 = np.stack(pair_k1, axis=1)[rows, best]
    k2 = np.stack(pair_k2, axis=1)[rows, best]
    return (best * m + k1) * m + k2


def _exhaustive_batch(cfg: SchemeConfig, h, y1, y2):
    table = codeword_table(cfg)
    n = y1.shape[0]

    def metrics(sl):
        c1 = h[:, :, table.rows1[sl] - 1] * table.syms1[sl][None, None, :]
        c2 = h[:, :, table.rows2[sl] - 1] * table.syms2[sl][None, None, :]
        return ((np.abs(y1[:, :, None] - c1) ** 2).sum(axis=1)
                + (np.abs(y2[:, :, None] - c2) ** 2).sum(axis=1))

    slice_size = max(1, (1 << 22) // max(1, n * y1.shape[1]))
    decided, _ = _sliced_argmin(metrics, n, cfg.n_codewords, slice_size)
    return decided


def _ciod_chunk(cfg: SchemeConfig, decoder: str, n_r: int, sigma2: float,
                rng: np.random.Generator, n: int):
    table = codeword_table(cfg)
    labels, h, noise = _draw_block(cfg, n_r, sigma2, rng, n)
    y1, y2 = _transmit_ciod(cfg, table, labels, h, noise, n)
    if decoder == "mrc":
        decided = _mrc_batch(cfg, h, y1, y2)
    elif decoder == "exhaustive":
        decided = _exhaustive_batch(cfg, h, y1, y2)
    else:  # per-trial reference path; slow, meant for small budgets
        decided = np.empty(n, dtype=np.int64)
        for t in range(n):
            y = np.stack([y1[t], y2[t]], axis=1)
            res = decoders.qr_hardlimit_decode(y, h[t], cfg)
            decided[t] = label_index(res.label, cfg)
    return labels, decided


def _chunk_task(args):
    cfg, decoder, n_r, sigma2, seed_path, n = args
    rng = substream(*seed_path)
    if cfg.scheme is Scheme.SM:
        labels, decided = _sm_chunk(cfg, n_r, sigma2, rng, n)
    else:
        labels, decided = _ciod_chunk(cfg, decoder, n_r, sigma2, rng, n)
    wrong = labels != decided
    errors = int(wrong.sum())
    bit_errors = _popcounts(np.bitwise_xor(labels, decided)[wrong], cfg.block_bits)
    return errors, bit_errors


# ---------------------------------------------------------------------------
# Sweep driver


def _point_chunks(sim: SimConfig):
    done = 0
    idx = 0
    while done < sim.max_trials:
        n = min(sim.chunk_size, sim.max_trials - done)
        yield idx, n
        done += n
        idx += 1


def _run_point(sim: SimConfig, run: SchemeRun, scheme_idx: int, point_idx: int,
               snr_db: float, pool) -> PointResult:
    sigma2 = snr_to_sigma2(snr_db).sigma2
    trials = errors = bit_errors = 0

    def tasks():
        for chunk_idx, n in _point_chunks(sim):
            seed_path = (sim.master_seed, scheme_idx, point_idx, chunk_idx)
            yield (run.cfg, run.decoder, sim.n_r, sigma2, seed_path, n), n

    if pool is None:
        for args, n in tasks():
            e, be = _chunk_task(args)
            trials += n
            errors += e
            bit_errors += be
            if errors >= sim.min_errors:
                break
    else:
        pending = []
        gen = tasks()
        exhausted = False
        while True:
            while not exhausted and len(pending) < sim.workers:
                try:
                    args, n = next(gen)
                except StopIteration:
                    exhausted = True
                    break
                pending.append((pool.submit(_chunk_task, args), n))
            if not pending:
                break
            fut, n = pending.pop(0)
            e, be = fut.result()
            trials += n
            errors += e
            bit_errors += be
            if errors >= sim.min_errors:
                for fut, _ in pending:
                    fut.cancel()
                break

    cfg = run.cfg
    return PointResult(scheme=run.name, decoder=run.decoder, nt=cfg.n_t,
                       nr=sim.n_r, m=cfg.m, bpcu=rate_bpcu(cfg), snr_db=snr_db,
                       trials=trials, errors=errors, bit_errors=bit_errors,
                       seed=sim.master_seed)


def run_ser_sweep(sim: SimConfig, log=None) -> SimResult:
    """Simulate every (scheme, SNR) point of the sweep."""
    points: list[PointResult] = []
    pool = ProcessPoolExecutor(max_workers=sim.workers) if sim.workers > 1 else None
    try:
        for s_idx, run in enumerate(sim.runs):
            for p_idx, snr_db in enumerate(sim.snr_db):
                point = _run_point(sim, run, s_idx, p_idx, snr_db, pool)
                points.append(point)
                if log is not None:
                    lo, hi = point.ci
                    log(f"{point.scheme} {snr_db:g} dB: ser={point.ser:.3e} "
                        f"[{lo:.2e}, {hi:.2e}] ({point.errors}/{point.trials})")
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)
    return SimResult(points=points, master_seed=sim.master_seed,
                     config_digest=_config_digest(sim))


CSV_COLUMNS = ("scheme", "decoder", "nt", "nr", "m", "bpcu", "snr_db",
               "trials", "errors", "ser", "ci_low", "ci_high", "seed")


def write_csv(result: SimResult, path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for p in result.points:
            lo, hi = p.ci
            writer.writerow([p.scheme, p.decoder, p.nt, p.nr, p.m,
                             f"{p.bpcu:.10g}", f"{p.snr_db:.10g}", p.trials,
                             p.errors, f"{p.ser:.10g}", f"{lo:.10g}",
                             f"{hi:.10g}", p.seed])


def estimate_diversity_slope(result: SimResult, scheme: str,
                             snr_window: tuple[float, float]) -> float:
    """Least-squares slope of log10(SER) against snr_db / 10 over a window."""
    lo, hi = snr_window
    pts = [p for p in result.scheme_points(scheme)
           if lo <= p.snr_db <= hi and p.errors > 0]
    if len(pts) < 2:
        raise ValueError("need at least two nonzero-error points in the window")
    x = np.array([p.snr_db / 10.0 for p in pts])
    y = np.array([math.log10(p.ser) for p in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def check_monotone(points: list[PointResult], widths: float = 2.0) -> bool:
    """SER non-increasing in SNR up to the stated number of CI half-widths."""
    pts = sorted(points, key=lambda p: p.snr_db)
    for a, b in zip(pts, pts[1:]):
        hw_a = (a.ci[1] - a.ci[0]) / 2
        hw_b = (b.ci[1] - b.ci[0]) / 2
        if b.ser > a.ser + widths * (hw_a + hw_b):
            return False
    return True


# ---------------------------------------------------------------------------
# Decoder cross-checking


@dataclass
class AgreementReport:
    trials: int
    ties_excluded: int
    disagreements: list[int]

    @property
    def ok(self) -> bool:
        return not self.disagreements


def verify_decoders(cfg: SchemeConfig, n_r: int, snr_db: float, trials: int,
                    seed: int) -> AgreementReport:
    """Run the three detectors on common trials and compare decisions.

    Trials whose two best exhaustive metrics are separated by less than 1e-9
    are excluded as ties; on all other trials the three detectors must agree
    exactly.
    """
    if cfg.scheme is Scheme.SM:
        raise ValueError("decoder agreement applies to the two-use schemes")
    rng = substream(seed, 0)
    sigma2 = snr_to_sigma2(snr_db).sigma2
    table = codeword_table(cfg)
    ties = 0
    disagree: list[int] = []
    for t in range(trials):
        label = int(rng.integers(cfg.n_codewords))
        h = (rng.standard_normal((n_r, cfg.n_antennas))
             + 1j * rng.standard_normal((n_r, cfg.n_antennas))) * np.sqrt(0.5)
        noise = (rng.standard_normal((n_r, 2))
                 + 1j * rng.standard_normal((n_r, 2))) * np.sqrt(sigma2)
        y = np.stack([h[:, table.rows1[label] - 1] * table.syms1[label],
                      h[:, table.rows2[label] - 1] * table.syms2[label]],
                     axis=1) + noise
        metrics = decoders.exhaustive_metrics(y, h, cfg)
        order = np.argsort(metrics)
        if metrics[order[1]] - metrics[order[0]] < 1e-9:
            ties += 1
            continue
        k_ex = int(order[0])
        k_mrc = label_index(decoders.ml_mrc_decode(y, h, cfg).label, cfg)
        k_qr = label_index(decoders.qr_hardlimit_decode(y, h, cfg).label, cfg)
        if not (k_ex == k_mrc == k_qr):
            disagree.append(t)
    return AgreementReport(trials=trials, ties_excluded=ties,
                           disagreements=disagree)


# ---------------------------------------------------------------------------
# Configuration files and presets

PRESETS = {
    "3bpcu": ("sm:bpsk", "low-dosm:qam4", "high-dosm:bpsk"),
    "4bpcu": ("sm:qam4", "low-dosm:rect8", "high-dosm:qam4"),
}

_SCHEME_TOKENS = {s.value: s for s in Scheme}


def parse_scheme_token(token: str, n_t: int, decoder: str = "mrc") -> SchemeRun:
    """Parse 'scheme:modulation' (e.g. 'low-dosm:qam4') into a SchemeRun."""
    try:
        scheme_name, mod = token.strip().lower().split(":")
        scheme = _SCHEME_TOKENS[scheme_name]
    except (ValueError, KeyError):
        raise ValueError(
            f"bad scheme token {token!r}; expected '<scheme>:<modulation>' with "
            f"scheme in {sorted(_SCHEME_TOKENS)}"
        ) from None
    cfg = make_config(scheme, n_t, mod, Normalization.UNIT_AVERAGE_ENERGY)
    return SchemeRun(cfg=cfg, decoder=decoder)


def read_config_file(path) -> dict[str, str]:
    """Flat key = value file; '#' starts a comment; later keys win."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip().lower()] = value.strip()
    return out


def sim_config_from_options(opts: dict[str, str]) -> SimConfig:
    """Build a SimConfig from string options (config file or CLI)."""
    n_t = int(opts.get("nt", 4))
    decoder = opts.get("decoder", "mrc")
    tokens: list[str] = []
    if "preset" in opts and opts["preset"]:
        preset = opts["preset"].lower()
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; have {sorted(PRESETS)}")
        tokens.extend(PRESETS[preset])
    if "schemes" in opts and opts["schemes"]:
        tokens.extend(t for t in opts["schemes"].split(",") if t.strip())
    if not tokens:
        raise ValueError("no schemes given; pass schemes=... or preset=...")
    runs = tuple(parse_scheme_token(t, n_t, decoder) for t in tokens)
    snr = tuple(float(v) for v in opts.get("snr_db", "0,5,10,15,20").split(","))
    return SimConfig(
        runs=runs,
        n_r=int(opts.get("nr", 2)),
        snr_db=snr,
        min_errors=int(opts.get("min_errors", 100)),
        max_trials=int(opts.get("max_trials", 1_000_000)),
        master_seed=int(opts.get("master_seed", 12345)),
        workers=int(opts.get("workers", 1)),
        chunk_size=int(opts.get("chunk_size", 65536)),
    )
