"""Offline code analysis: pairwise determinant spectra, coding gain with the
per-case decomposition, diversity certification, and the unit-circle phase
search for the high-DoSM codebook sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .codebooks import (
    CodewordLabel,
    REFERENCE_PHASES,
    Scheme,
    SchemeConfig,
    codeword_table,
    grid_phases,
    label_from_index,
)
from .constellation import Kind, Normalization, build_constellation, rotate

CASE_SAME = "same-cb"
CASE_ADJACENT = "adjacent-cb"
CASE_DISJOINT = "disjoint-cb"
CASE_CROSS = "cross-cbs"

# Previously reported low-DoSM gains, kept as a regression reference for the
# normalization cross-check in nvd_scan (their normalization convention is
# not fixed by the values alone).
REFERENCE_LOW_DOSM_GAINS = {4: 1.6446, 16: 1.6, 64: 1.6, 256: 1.6}

_HIST_STEP = 0.25
_DEFAULT_PAIR_GUARD = 10_000


@dataclass
class GainReport:
    scheme: str
    m: int
    normalization: str
    gain: float
    argmin_pair: tuple[CodewordLabel, CodewordLabel]
    case: str
    per_case: dict[str, float]
    histogram: dict[float, int]
    method: str


@dataclass
class PhaseAssignment:
    phases: tuple[complex, ...]
    grid_indices: tuple[int, ...]
    achieved_gain: float
    reference_gain: float | None


@dataclass
class DiversityCertificate:
    ok: bool
    gain: float
    witness: tuple[CodewordLabel, CodewordLabel] | None


def det_distance(x, x_prime) -> float:
    """|det(D^H D)| of the difference of two space-time matrices."""
    a = x.dense() if hasattr(x, "dense") else np.asarray(x, dtype=complex)
    b = x_prime.dense() if hasattr(x_prime, "dense") else np.asarray(x_prime, dtype=complex)
    delta = a - b
    if delta.shape[1] == 1:
        return float(np.sum(np.abs(delta) ** 2))
    c1, c2 = delta[:, 0], delta[:, 1]
    n1 = float(np.sum(np.abs(c1) ** 2))
    n2 = float(np.sum(np.abs(c2) ** 2))
    cross = complex(np.vdot(c1, c2))
    return abs(n1 * n2 - abs(cross) ** 2)


def _hist_update(hist: dict[float, int], values: np.ndarray):
    nz = values[values > 0]
    if nz.size:
        bins = np.floor(np.log10(nz) / _HIST_STEP) * _HIST_STEP
        uniq, counts = np.unique(bins, return_counts=True)
        for b, c in zip(uniq, counts):
            key = round(float(b), 6)
            hist[key] = hist.get(key, 0) + int(c)
    zeros = int(values.size - nz.size)
    if zeros:
        hist[-math.inf] = hist.get(-math.inf, 0) + zeros


def _classify_pairs(cfg: SchemeConfig, p: int, q0: int, table) -> np.ndarray:
    """Case name for codeword p against codewords q0.. (vectorized)."""
    n = table.rows1.size
    m2 = cfg.m * cfg.m
    heads = np.arange(q0, n) // m2
    head_p = p // m2
    if cfg.scheme is Scheme.LOW_DOSM:
        diff = (heads - head_p) % cfg.n_t
        out = np.full(heads.shape, CASE_DISJOINT, dtype=object)
        out[(diff == 1) | (diff == cfg.n_t - 1)] = CASE_ADJACENT
        out[diff == 0] = CASE_SAME
        return out
    i_q, j_q = heads // cfg.n_t, heads % cfg.n_t
    i_p, j_p = head_p // cfg.n_t, head_p % cfg.n_t
    out = np.full(heads.shape, CASE_CROSS, dtype=object)
    within = i_q == i_p
    same = within & (j_q == j_p)
    r1q, r2q = table.rows1[q0:], table.rows2[q0:]
    r1p, r2p = table.rows1[p], table.rows2[p]
    overlap = (r1q == r1p) | (r1q == r2p) | (r2q == r1p) | (r2q == r2p)
    out[within & ~same & overlap] = CASE_ADJACENT
    out[within & ~same & ~overlap] = CASE_DISJOINT
    out[same] = CASE_SAME
    return out


def _energy(z):
    # re^2 + im^2 directly, so identical symbols cancel exactly in the
    # Gram entries (np.abs squares a square root and loses that exactness)
    return z.real ** 2 + z.imag ** 2


def _pair_dets(table, p: int, q0: int) -> np.ndarray:
    """Closed-form |det| of codeword p against codewords q0.. without densifying."""
    r1, s1 = table.rows1, table.syms1
    r2, s2 = table.rows2, table.syms2
    s1p, s2p = s1[p], s2[p]
    r1p, r2p = r1[p], r2[p]
    s1q, s2q = s1[q0:], s2[q0:]
    r1q, r2q = r1[q0:], r2[q0:]
    n1 = (_energy(s1p) + _energy(s1q)
          - 2 * (np.conj(s1p) * s1q).real * (r1q == r1p))
    n2 = (_energy(s2p) + _energy(s2q)
          - 2 * (np.conj(s2p) * s2q).real * (r2q == r2p))
    cross = (np.conj(s1p) * s2p * (r2p == r1p)
             - np.conj(s1p) * s2q * (r2q == r1p)
             - np.conj(s1q) * s2p * (r2p == r1q)
             + np.conj(s1q) * s2q * (r2q == r1q))
    return np.abs(n1 * n2 - np.abs(cross) ** 2)


def _full_pair_scan(cfg: SchemeConfig) -> GainReport:
    table = codeword_table(cfg)
    n = cfg.n_codewords
    per_case: dict[str, float] = {}
    arg_case: dict[str, tuple[int, int]] = {}
    hist: dict[float, int] = {}
    for p in range(n - 1):
        dets = _pair_dets(table, p, p + 1)
        cases = _classify_pairs(cfg, p, p + 1, table)
        _hist_update(hist, dets)
        for case in np.unique(cases):
            mask = cases == case
            k = int(np.argmin(np.where(mask, dets, np.inf)))
            v = float(dets[k])
            if case not in per_case or v < per_case[case]:
                per_case[case] = v
                arg_case[case] = (p, p + 1 + k)
    case = min(per_case, key=per_case.get)
    p, q = arg_case[case]
    return GainReport(
        scheme=cfg.scheme.value,
        m=cfg.m,
        normalization="custom",
        gain=per_case[case],
        argmin_pair=(label_from_index(p, cfg), label_from_index(q, cfg)),
        case=case,
        per_case=per_case,
        histogram=hist,
        method="full-pairs",
    )


def _interleaved_moments(cfg: SchemeConfig):
    pts = cfg.constellation.array
    m = pts.size
    k1 = np.repeat(np.arange(m), m)
    k2 = np.tile(np.arange(m), m)
    st1 = pts.real[k1] + 1j * pts.imag[k2]
    st2 = pts.real[k2] + 1j * pts.imag[k1]
    return k1, k2, np.abs(st1) ** 2, np.abs(st2) ** 2


def _case_restricted_scan(cfg: SchemeConfig) -> GainReport:
    """Low-DoSM minimum by case, scanning symbols instead of codeword pairs.

    The determinant of a pair depends only on its case and the symbols, not
    on which codebook realizes the case, so the antenna axis is dropped:
    same-codebook pairs reduce to coordinate differences, neighbouring and
    disjoint codebooks to products of interleaved symbol energies.  Repeated
    values are deduplicated before the quadratic combination scan, keeping
    one representative index per value for witness reconstruction.
    """
    if cfg.scheme is not Scheme.LOW_DOSM or cfg.n_t < 4:
        raise ValueError("case-restricted scan applies to low-DoSM with n_t >= 4")
    pts = cfg.constellation.array
    m = pts.size
    hist: dict[float, int] = {}
    per_case: dict[str, float] = {}
    argmins: dict[str, tuple] = {}

    def _scan(values_a, values_b, combine, forbid_origin):
        best = math.inf
        best_idx = (0, 0)
        n_a = values_a.shape[0]
        for a0 in range(0, n_a, 256):
            a = slice(a0, min(a0 + 256, n_a))
            det = combine(values_a[a], values_b)
            if forbid_origin is not None:
                fa, fb = forbid_origin
                det[np.ix_(fa[a], fb)] = np.inf
            k = int(np.argmin(det))
            i, j = divmod(k, det.shape[1])
            if det[i, j] < best:
                best, best_idx = float(det[i, j]), (a0 + i, j)
            det[np.isinf(det)] = 0.0
            _hist_update(hist, det.ravel())
        return best, best_idx

    # Same codebook: |dst1|^2 |dst2|^2 with dst1 = d1I + j d2Q, dst2 = d2I + j d1Q.
    diff = (pts[:, None] - pts[None, :]).ravel()
    dvals, drep = np.unique(np.round(np.stack([diff.real ** 2, diff.imag ** 2], 1), 14),
                            axis=0, return_index=True)
    zero = (dvals[:, 0] + dvals[:, 1]) == 0
    best, (ia, ib) = _scan(
        dvals, dvals,
        lambda va, vb: (va[:, 0:1] + vb[None, :, 1]) * (vb[None, :, 0] + va[:, 1:2]),
        (zero, zero),
    )
    per_case[CASE_SAME] = best
    argmins[CASE_SAME] = (int(drep[ia]), int(drep[ib]))

    k1, k2, u1, u2 = _interleaved_moments(cfg)
    uvals, urep = np.unique(np.round(np.stack([u1, u2], 1), 14),
                            axis=0, return_index=True)
    for case, combine in (
        (CASE_ADJACENT, lambda va, vb: (va[:, 0:1] * va[:, 1:2]
                                        + np.outer(va[:, 0], vb[:, 1])
                                        + (vb[:, 0] * vb[:, 1])[None, :])),
        (CASE_DISJOINT, lambda va, vb: (va[:, 0:1] + vb[None, :, 0])
         * (va[:, 1:2] + vb[None, :, 1])),
    ):
        best, (ia, ib) = _scan(uvals, uvals, combine, None)
        per_case[case] = best
        argmins[case] = (int(urep[ia]), int(urep[ib]))

    case = min(per_case, key=per_case.get)
    other_cb = {CASE_SAME: 1, CASE_ADJACENT: 2, CASE_DISJOINT: 3}[case]
    ia, ib = argmins[case]
    if case == CASE_SAME:
        a1, b1 = divmod(ia, m)   # delta1 endpoints (indices into the point set)
        a2, b2 = divmod(ib, m)
        pair = (CodewordLabel(antennas=(1,), symbols=(a1, a2)),
                CodewordLabel(antennas=(1,), symbols=(b1, b2)))
    else:
        pair = (CodewordLabel(antennas=(1,), symbols=(int(k1[ia]), int(k2[ia]))),
                CodewordLabel(antennas=(other_cb,), symbols=(int(k1[ib]), int(k2[ib]))))
    return GainReport(
        scheme=cfg.scheme.value,
        m=m,
        normalization="custom",
        gain=per_case[case],
        argmin_pair=pair,
        case=case,
        per_case=per_case,
        histogram=hist,
        method="case-restricted",
    )


def coding_gain(cfg: SchemeConfig, pair_guard: int = _DEFAULT_PAIR_GUARD,
                normalization: str | None = None) -> GainReport:
    """Minimum pairwise determinant over the whole codeword collection."""
    if cfg.scheme is Scheme.SM:
        raise ValueError("coding gain applies to the two-use schemes")
    if cfg.n_codewords <= pair_guard:
        report = _full_pair_scan(cfg)
    elif cfg.scheme is Scheme.LOW_DOSM and cfg.n_t >= 4:
        report = _case_restricted_scan(cfg)
    else:
        raise ValueError(
            f"{cfg.n_codewords} codewords exceed the exhaustive-pair guard "
            f"({pair_guard}) and no case-restricted scan applies"
        )
    if normalization is not None:
        report.normalization = normalization
    return report


def diversity_certificate(cfg: SchemeConfig, threshold: float = 1e-12) -> DiversityCertificate:
    """Certify diversity order two: the minimum determinant stays above threshold."""
    report = coding_gain(cfg)
    ok = report.gain > threshold
    return DiversityCertificate(ok=ok, gain=report.gain,
                                witness=None if ok else report.argmin_pair)


def _set_slices(cfg: SchemeConfig) -> list[slice]:
    per_set = cfg.n_t * cfg.m * cfg.m
    return [slice(i * per_set, (i + 1) * per_set) for i in range(cfg.n_t)]


def _cross_min_table(cfg_base: SchemeConfig, grid_n: int) -> tuple[float, np.ndarray]:
    """Per set-pair, per relative-phase minima of the cross-set determinants.

    Within-set determinants are invariant to the set phases (a common unit
    factor scales both codewords), and a cross-set determinant depends on
    the two phases only through their ratio, so the whole search space is
    summarized by one (n_t, n_t, grid_n) table plus a within-set floor.
    """
    table = codeword_table(cfg_base)
    slices = _set_slices(cfg_base)
    within = math.inf
    for sl in slices:
        sub_r1, sub_s1 = table.rows1[sl], table.syms1[sl]
        sub_r2, sub_s2 = table.rows2[sl], table.syms2[sl]
        n = sub_r1.size
        for p in range(n - 1):
            sub = _PairView(sub_r1, sub_s1, sub_r2, sub_s2)
            within = min(within, float(_pair_dets(sub, p, p + 1).min()))
    omega = np.exp(2j * np.pi / grid_n)
    cross = np.full((cfg_base.n_t, cfg_base.n_t, grid_n), math.inf)
    for ia in range(cfg_base.n_t):
        sa = slices[ia]
        ra1, ss1 = table.rows1[sa], table.syms1[sa]
        ra2, ss2 = table.rows2[sa], table.syms2[sa]
        for ib in range(ia + 1, cfg_base.n_t):
            sb = slices[ib]
            rb1, tb1 = table.rows1[sb], table.syms1[sb]
            rb2, tb2 = table.rows2[sb], table.syms2[sb]
            for delta in range(grid_n):
                w = omega ** delta
                n1 = (_energy(ss1[:, None]) + _energy(tb1[None, :])
                      - 2 * (np.conj(ss1[:, None]) * (w * tb1[None, :])).real
                      * (ra1[:, None] == rb1[None, :]))
                n2 = (_energy(ss2[:, None]) + _energy(tb2[None, :])
                      - 2 * (np.conj(ss2[:, None]) * (w * tb2[None, :])).real
                      * (ra2[:, None] == rb2[None, :]))
                x = (np.conj(ss1[:, None]) * ss2[:, None] * (ra2[:, None] == ra1[:, None])
                     - np.conj(ss1[:, None]) * (w * tb2[None, :]) * (rb2[None, :] == ra1[:, None])
                     - np.conj(w * tb1[None, :]) * ss2[:, None] * (ra2[:, None] == rb1[None, :])
                     + np.conj(w * tb1[None, :]) * (w * tb2[None, :]) * (rb2[None, :] == rb1[None, :]))
                det = np.abs(n1 * n2 - np.abs(x) ** 2)
                cross[ia, ib, delta] = float(det.min())
    return within, cross


@dataclass(frozen=True, eq=False)
class _PairView:
    rows1: np.ndarray
    syms1: np.ndarray
    rows2: np.ndarray
    syms2: np.ndarray


def optimize_phases(cfg: SchemeConfig, grid_n: int = 16) -> PhaseAssignment:
    """Exhaustive unit-circle grid search for the per-set phases.

    The first set's phase is pinned to grid index zero: multiplying every
    codeword by a common unit scalar leaves all pairwise determinants
    unchanged, so assignments are equivalent up to a global phase.
    """
    if cfg.scheme is not Scheme.HIGH_DOSM:
        raise ValueError("phase optimization applies to the high-DoSM scheme")
    if cfg.n_t > 8:
        raise ValueError("phase grid search is infeasible beyond n_t = 8")
    base = replace(cfg, cbs_phases=(1.0 + 0j,) * cfg.n_t)
    within, cross = _cross_min_table(base, grid_n)

    pair_idx = [(ia, ib) for ia in range(cfg.n_t) for ib in range(ia + 1, cfg.n_t)]
    n_assign = grid_n ** (cfg.n_t - 1)
    best_gain = -math.inf
    best_k = None
    chunk = 1 << 18
    for start in range(0, n_assign, chunk):
        idx = np.arange(start, min(start + chunk, n_assign))
        ks = [np.zeros_like(idx)]
        for pos in range(cfg.n_t - 1):
            ks.append((idx // grid_n ** pos) % grid_n)
        gmin = np.full(idx.shape, within)
        for ia, ib in pair_idx:
            delta = (ks[ib] - ks[ia]) % grid_n
            np.minimum(gmin, cross[ia, ib][delta], out=gmin)
        j = int(np.argmax(gmin))
        if gmin[j] > best_gain:
            best_gain = float(gmin[j])
            best_k = tuple(int(k[j]) for k in ks)

    phases = grid_phases(best_k, grid_n)
    achieved = coding_gain(replace(cfg, cbs_phases=phases)).gain
    reference = None
    name = _modulation_name(cfg)
    if name in REFERENCE_PHASES and len(REFERENCE_PHASES[name]) == cfg.n_t:
        ref_phases = grid_phases(REFERENCE_PHASES[name], 16)
        reference = coding_gain(replace(cfg, cbs_phases=ref_phases)).gain
    return PhaseAssignment(phases=phases, grid_indices=best_k,
                           achieved_gain=achieved, reference_gain=reference)


def _modulation_name(cfg: SchemeConfig) -> str | None:
    kind = cfg.constellation.kind
    if kind is Kind.BPSK:
        return "bpsk"
    if kind is Kind.SQUARE_QAM and cfg.m == 4:
        return "qam4"
    return None


@dataclass
class GainTableRow:
    scheme: str
    m: int
    normalization: str
    case: str
    gain: float


def nvd_scan(cfg_base: SchemeConfig, m_list) -> list[GainTableRow]:
    """Coding gain per constellation size under both normalizations.

    Emits one row per case plus an overall row for each (M, normalization),
    so determinant constancy across M can be read directly off the table.
    """
    if cfg_base.scheme is Scheme.SM:
        raise ValueError("the gain scan applies to the two-use schemes")
    rows: list[GainTableRow] = []
    kind = cfg_base.constellation.kind
    for m in m_list:
        for norm in Normalization:
            const = build_constellation(kind, m, norm)
            if cfg_base.constellation.theta:
                const = rotate(const, cfg_base.constellation.theta)
            cfg = replace(cfg_base, constellation=const)
            report = coding_gain(cfg, normalization=norm.value)
            for case in sorted(report.per_case):
                rows.append(GainTableRow(cfg.scheme.value, m, norm.value,
                                         case, report.per_case[case]))
            rows.append(GainTableRow(cfg.scheme.value, m, norm.value,
                                     "overall", report.gain))
    return rows


def write_gain_csv(rows: list[GainTableRow], path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "M", "normalization", "case", "gain"])
        for r in rows:
            writer.writerow([r.scheme, r.m, r.normalization, r.case, f"{r.gain:.10g}"])


def gain_report_rows(report: GainReport) -> list[GainTableRow]:
    rows = [GainTableRow(report.scheme, report.m, report.normalization, case, gain)
            for case, gain in sorted(report.per_case.items())]
    rows.append(GainTableRow(report.scheme, report.m, report.normalization,
                             "overall", report.gain))
    return rows
