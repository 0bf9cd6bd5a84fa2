"""Maximum-likelihood detectors for the three schemes.

Three routes to the same decision, with decreasing search cost:

* exhaustive search over every codeword (the ground-truth oracle),
* per-antenna-pair combining with independent symbol-by-symbol decisions
  (2M metric evaluations per pair instead of M^2),
* a real-valued QR factorization whose triangular factor decouples the two
  symbols, so each in-phase coordinate is recovered by hard-limiting and
  only the quadrature levels are enumerated (2*sqrt(M) per pair for square
  sets).

All three break metric ties toward the lowest codeword label, so they are
decision-identical on every trial whose top two metrics are separated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import realify_matrix, realify_vector
from .codebooks import (
    CodewordLabel,
    Scheme,
    SchemeConfig,
    codeword_table,
    label_from_index,
    legitimate_pairs,
)
from .constellation import quantize_index


class RankDeficientChannel(RuntimeError):
    """Raised when a drawn channel leaves the real-valued model unsolvable."""


@dataclass(frozen=True)
class DecodeResult:
    label: CodewordLabel
    metric: float
    evals: int


@dataclass(frozen=True, eq=False)
class RealDecompState:
    """QR factorization of the real-valued equivalent channel for one antenna pair."""

    heq_real: np.ndarray   # 4 N_r x 4
    q1: np.ndarray         # 4 N_r x 4, orthonormal columns
    r1: np.ndarray         # 4 x 4 upper triangular, zero in rows 1-2 / cols 3-4
    z1: np.ndarray | None = None


@dataclass(frozen=True)
class PairDecision:
    """Symbol decisions for one fixed antenna pair."""

    s1: complex
    s2: complex
    k1: int
    k2: int
    metric: float
    evals: int


def _as_block(y) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    if y.ndim == 1:
        y = y[:, None]
    return y


def ml_sm_decode(y, h, cfg: SchemeConfig) -> DecodeResult:
    """Exhaustive single-use detection over all (antenna, symbol) hypotheses."""
    if cfg.scheme is not Scheme.SM:
        raise ValueError("ml_sm_decode needs a plain-scheme config")
    y = np.asarray(y, dtype=complex).ravel()
    h = np.asarray(h, dtype=complex)
    if h.shape != (y.size, cfg.n_antennas):
        raise ValueError("channel shape does not match receiver and antenna counts")
    table = codeword_table(cfg)
    cand = h[:, table.rows1 - 1] * table.syms1[None, :]
    metrics = np.abs(y[:, None] - cand) ** 2
    metrics = metrics.sum(axis=0)
    k = int(np.argmin(metrics))
    return DecodeResult(label=label_from_index(k, cfg),
                        metric=float(metrics[k]), evals=metrics.size)


def exhaustive_metrics(y_block, h, cfg: SchemeConfig) -> np.ndarray:
    """Per-codeword squared-error metrics, in label order."""
    y = _as_block(y_block)
    h = np.asarray(h, dtype=complex)
    if h.shape != (y.shape[0], cfg.n_antennas):
        raise ValueError("channel shape does not match receiver and antenna counts")
    table = codeword_table(cfg)
    e1 = (np.abs(y[:, 0, None] - h[:, table.rows1 - 1] * table.syms1[None, :]) ** 2).sum(axis=0)
    e2 = (np.abs(y[:, 1, None] - h[:, table.rows2 - 1] * table.syms2[None, :]) ** 2).sum(axis=0)
    return e1 + e2


def ml_exhaustive_decode(y_block, h, cfg: SchemeConfig) -> DecodeResult:
    """Brute force over the full codeword enumeration; the reference oracle."""
    if cfg.scheme is Scheme.SM:
        raise ValueError("use ml_sm_decode for the single-use scheme")
    metrics = exhaustive_metrics(y_block, h, cfg)
    k = int(np.argmin(metrics))
    return DecodeResult(label=label_from_index(k, cfg),
                        metric=float(metrics[k]), evals=metrics.size)


def codeword_metric(y_block, h, codeword) -> float:
    """Squared-error metric of one codeword, for consistency checks."""
    y = _as_block(y_block)
    h = np.asarray(h, dtype=complex)
    total = 0.0
    for use, (ant, sym) in enumerate(codeword.slots):
        total += float(np.sum(np.abs(y[:, use] - h[:, ant - 1] * sym) ** 2))
    return total


def mrc_ciod_decode(y_block, h, l1: int, l2: int, cfg: SchemeConfig,
                    phase: complex | None = None) -> PairDecision:
    """Symbol decisions for a fixed antenna pair via ratio combining.

    Combining each use against its own column turns the block into two
    scalar observations; de-interleaving then attaches the gain a = |h_l1|^2
    to one coordinate of each symbol and b = |h_l2|^2 to the other.  Because
    the combined noise coordinates carry variances a*sigma^2 and b*sigma^2,
    the per-symbol ML metric weights them by b and a respectively, which
    makes the joint pair metric separable in s1 and s2.
    """
    if l1 == l2:
        raise ValueError("the two slots must use distinct antennas")
    y = _as_block(y_block)
    h = np.asarray(h, dtype=complex)
    if phase is None:
        phase = _pair_phase(l1, l2, cfg)
    g1 = phase * h[:, l1 - 1]
    g2 = phase * h[:, l2 - 1]
    a = float(np.sum(np.abs(g1) ** 2))
    b = float(np.sum(np.abs(g2) ** 2))
    yh1 = complex(np.vdot(g1, y[:, 0]))
    yh2 = complex(np.vdot(g2, y[:, 1]))
    # De-interleaved observations: yt1 = a s1I + j b s1Q, yt2 = b s2I + j a s2Q.
    yt1 = yh1.real + 1j * yh2.imag
    yt2 = yh2.real + 1j * yh1.imag

    pts = cfg.constellation.array
    m1 = b * (yt1.real - a * pts.real) ** 2 + a * (yt1.imag - b * pts.imag) ** 2
    m2 = a * (yt2.real - b * pts.real) ** 2 + b * (yt2.imag - a * pts.imag) ** 2
    k1 = int(np.argmin(m1))
    k2 = int(np.argmin(m2))
    s1 = complex(pts[k1])
    s2 = complex(pts[k2])
    t1 = s1.real + 1j * s2.imag
    t2 = s2.real + 1j * s1.imag
    metric = float(np.sum(np.abs(y[:, 0] - g1 * t1) ** 2)
                   + np.sum(np.abs(y[:, 1] - g2 * t2) ** 2))
    return PairDecision(s1=s1, s2=s2, k1=k1, k2=k2, metric=metric, evals=2 * pts.size)


def _pair_phase(l1: int, l2: int, cfg: SchemeConfig) -> complex:
    if cfg.scheme is Scheme.LOW_DOSM:
        return 1.0 + 0j
    i = (l2 - l1) % (cfg.n_t + 1)
    if not 1 <= i <= cfg.n_t or l1 > cfg.n_t:
        raise ValueError(f"({l1}, {l2}) is not a legitimate antenna pair")
    return complex(cfg.cbs_phases[i - 1])


def _pair_label(pair_index: int, k1: int, k2: int, cfg: SchemeConfig) -> CodewordLabel:
    if cfg.scheme is Scheme.LOW_DOSM:
        return CodewordLabel(antennas=(pair_index + 1,), symbols=(k1, k2))
    i, j = pair_index // cfg.n_t + 1, pair_index % cfg.n_t + 1
    return CodewordLabel(antennas=(i, j), symbols=(k1, k2))


def ml_mrc_decode(y_block, h, cfg: SchemeConfig) -> DecodeResult:
    """Outer minimization over legitimate antenna pairs of the combining decoder."""
    if cfg.scheme is Scheme.SM:
        raise ValueError("use ml_sm_decode for the single-use scheme")
    best = None
    best_pair = -1
    evals = 0
    for idx, (l1, l2, phase) in enumerate(legitimate_pairs(cfg)):
        dec = mrc_ciod_decode(y_block, h, l1, l2, cfg, phase=phase)
        evals += dec.evals
        if best is None or dec.metric < best.metric:
            best, best_pair = dec, idx
    return DecodeResult(label=_pair_label(best_pair, best.k1, best.k2, cfg),
                        metric=best.metric, evals=evals)


# Interleaving map on [s1I, s1Q, s2I, s2Q] producing [st1, 0, 0, st2].
_V1 = np.array([[1, 0, 0, 1j],
                [0, 0, 0, 0],
                [0, 0, 0, 0],
                [0, 1j, 1, 0]], dtype=complex)


def _v2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0, 0],
                     [s, c, 0, 0],
                     [0, 0, c, -s],
                     [0, 0, s, c]])


def build_real_decomp(h, l1: int, l2: int, cfg: SchemeConfig,
                      phase: complex | None = None) -> RealDecompState:
    """Real-valued equivalent channel for one antenna pair and its thin QR.

    The complex model stacks the two uses, factors the interleaving and the
    constellation rotation into explicit matrices, and keeps only the
    columns that multiply the four real coordinates.  Columns 1-2 of the
    realified matrix are orthogonal to columns 3-4 for every channel draw,
    which is what zeroes the upper-right block of the triangular factor.
    """
    h = np.asarray(h, dtype=complex)
    if phase is None:
        phase = _pair_phase(l1, l2, cfg)
    hc = np.stack([phase * h[:, l1 - 1], phase * h[:, l2 - 1]], axis=1)
    heq = np.kron(np.eye(2), hc) @ _V1 @ _v2(cfg.constellation.theta)
    # Real columns only: the coordinate vector is real, so the equivalent
    # real map keeps the even-indexed columns of the full realification.
    heq_real = realify_matrix(heq)[:, 0::2]
    q1, r1 = np.linalg.qr(heq_real, mode="reduced")
    scale = float(np.max(np.abs(r1))) or 1.0
    if float(np.min(np.abs(np.diag(r1)))) < 1e-10 * scale:
        raise RankDeficientChannel(f"degenerate channel for antenna pair ({l1}, {l2})")
    return RealDecompState(heq_real=heq_real, q1=q1, r1=r1)


def _stacked_real_decomps(h, cfg: SchemeConfig):
    """Realified equivalent channels and their QRs for all pairs at once."""
    pairs = legitimate_pairs(cfg)
    w = _V1 @ _v2(cfg.constellation.theta)
    hc = np.stack([np.stack([phase * h[:, l1 - 1], phase * h[:, l2 - 1]], axis=1)
                   for l1, l2, phase in pairs])
    heq = np.concatenate([hc @ w[:2, :], hc @ w[2:, :]], axis=1)
    n_r = h.shape[0]
    heq_real = np.empty((len(pairs), 4 * n_r, 4))
    heq_real[:, 0::2, :] = heq.real
    heq_real[:, 1::2, :] = heq.imag
    q1, r1 = np.linalg.qr(heq_real)
    diag = np.abs(r1[:, np.arange(4), np.arange(4)])
    if (diag.min(axis=1) < 1e-10 * np.maximum(diag.max(axis=1), 1e-300)).any():
        raise RankDeficientChannel("degenerate channel draw")
    return q1, r1


def _halved_search(z0: float, z1: float, r00: float, r01: float, r11: float, cfg):
    """Min over the quadrature grid with the in-phase level hard-limited."""
    grid_i = cfg.constellation.pam_i
    grid_q = cfg.constellation.pam_q
    best = math.inf
    best_kq = best_ki = 0
    for kq, q in enumerate(grid_q.levels):
        ki = quantize_index((z0 - r01 * q) / r00, grid_i)
        xi = grid_i.levels[ki]
        metric = (z0 - r00 * xi - r01 * q) ** 2 + (z1 - r11 * q) ** 2
        if metric < best:
            best, best_ki, best_kq = metric, ki, kq
    return best, best_ki, best_kq, grid_q.n


def qr_hardlimit_decode(y_block, h, cfg: SchemeConfig) -> DecodeResult:
    """Reduced-complexity detection via the triangular real-valued model.

    For each legitimate antenna pair the block structure of the triangular
    factor decouples the two symbols; conditioning on each quadrature level
    recovers the matching in-phase level by hard-limiting, so only the
    quadrature axis is enumerated.
    """
    if cfg.scheme is Scheme.SM:
        raise ValueError("use ml_sm_decode for the single-use scheme")
    y = _as_block(y_block)
    h = np.asarray(h, dtype=complex)
    ybar = realify_vector(np.concatenate([y[:, 0], y[:, 1]]))
    y_norm2 = float(ybar @ ybar)
    grid_to_index = cfg.constellation.grid_to_index
    q1, r1 = _stacked_real_decomps(h, cfg)
    zs = np.einsum("pij,i->pj", q1, ybar)

    best_metric = math.inf
    best_label = None
    evals = 0
    for idx in range(r1.shape[0]):
        z = zs[idx]
        r = r1[idx]
        m1, ki1, kq1, n1 = _halved_search(z[0], z[1], r[0, 0], r[0, 1], r[1, 1], cfg)
        m2, ki2, kq2, n2 = _halved_search(z[2], z[3], r[2, 2], r[2, 3], r[3, 3], cfg)
        evals += n1 + n2
        metric = m1 + m2 + y_norm2 - float(z @ z)
        if metric < best_metric:
            k1 = int(grid_to_index[ki1, kq1])
            k2 = int(grid_to_index[ki2, kq2])
            best_metric = metric
            best_label = _pair_label(idx, k1, k2, cfg)
    return DecodeResult(label=best_label, metric=best_metric, evals=evals)


def decode(y_block, h, cfg: SchemeConfig, decoder: str = "mrc") -> DecodeResult:
    """Dispatch by decoder name ('exhaustive', 'mrc', or 'qr')."""
    if cfg.scheme is Scheme.SM:
        return ml_sm_decode(np.asarray(y_block, dtype=complex).ravel(), h, cfg)
    if decoder == "exhaustive":
        return ml_exhaustive_decode(y_block, h, cfg)
    if decoder == "mrc":
        return ml_mrc_decode(y_block, h, cfg)
    if decoder == "qr":
        return qr_hardlimit_decode(y_block, h, cfg)
    raise ValueError(f"unknown decoder {decoder!r}")
