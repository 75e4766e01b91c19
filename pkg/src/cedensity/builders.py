"""Constructions of sets with prescribed finite-window density behaviour.

Inputs are rational sequences or stage-indexed approximations; outputs are
explicit sets (SubsetArtifact) or stage enumerations (CEStream) together
with exact-rational certificates for the inequalities each construction
actually establishes on the window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .approximators import SubsetArtifact, _seq_to_fn
from .core import CEStream, NEVER, ceil_div, profile_from_bits
from .errors import (CapExceeded, ContractViolated, RatioUnrealizable,
                     WindowExhausted)


# -- oscillation-target builder -------------------------------------------

def _clamp_unit(q: Fraction, n: int) -> Fraction:
    """Push q into (0,1): targets at or beyond the endpoints are replaced
    by 1/(n+2) resp. 1 − 1/(n+2) (recorded on the checkpoint)."""
    if q <= 0:
        return Fraction(1, n + 2)
    if q >= 1:
        return 1 - Fraction(1, n + 2)
    return q


def infsup_build(q_seq, n_checkpoints: int, n_max: int) -> SubsetArtifact:
    """Build a set whose prefix density visits each target q_n in turn.

    Checkpoints s_0 = 1 (with 0 in the set) and then, per target: if the
    current density exceeds the target, extend with an excluded block until
    it drops to the target; otherwise extend with a fully included block
    until it rises to the target.  Certifies |rho_{s_n} − q_n| <= 1/(n+1)
    at every checkpoint (cross-multiplied integers), and each block being
    all-in or all-out makes every intermediate density lie between the
    checkpoint densities.  The window min/max of the checkpoint densities
    therefore track liminf/limsup of the targets — on the window only.
    """
    qs = _seq_to_fn(q_seq)
    if n_max < 2:
        raise ValueError("n_max too small")
    included = [(0, 1)]  # list of included [lo, hi) blocks
    checkpoints = [{"n": 0, "s": 1, "count": 1,
                    "q_num": _clamp_unit(Fraction(qs(0)), 0).numerator,
                    "q_den": _clamp_unit(Fraction(qs(0)), 0).denominator}]
    diagnostics = []
    s = 1
    count = 1
    for n in range(1, n_checkpoints + 1):
        q = _clamp_unit(Fraction(qs(n)), n)
        num, den = q.numerator, q.denominator
        if count * den > num * s:
            # excluded block: density falls as 1/t; least t with c/t <= q
            t = max(s + 1, ceil_div(count * den, num))
        else:
            # included block: least t with (count + t − s)/t >= q
            t = max(s + 1, ceil_div((s - count) * den, den - num))
            included.append((s, t))
            count += t - s
        if t > n_max:
            diagnostics.append({
                "error": "Truncated",
                "detail": f"checkpoint {n} needs s={t} beyond n_max={n_max}",
                "completed": n - 1,
            })
            break
        s = t
        checkpoints.append({"n": n, "s": s, "count": count,
                            "q_num": num, "q_den": den})
    bits = np.zeros(s, dtype=bool)
    for lo, hi in included:
        bits[lo:hi] = True
    guarantee = {"form": "target-approach"}  # |count·den − num·s|·(n+1) <= s·den
    return SubsetArtifact("infsup_build", bits, checkpoints, guarantee,
                          diagnostics)


def interleave_targets(low_seq, high_seq, pivot, n_pairs: int):
    """Merge a lower-target and an upper-target sequence into one target
    list, pinning both against a pivot rational (lower targets are capped
    at the pivot, upper targets floored at it) so the built set's density
    oscillates across the pivot."""
    lo = _seq_to_fn(low_seq)
    hi = _seq_to_fn(high_seq)
    p = Fraction(pivot)
    out = []
    for n in range(n_pairs):
        out.append(min(Fraction(lo(n)), p))
        out.append(max(Fraction(hi(n)), p))
    return out


def verify_infsup(artifact: SubsetArtifact) -> dict:
    """Re-check the target-approach bound and blockwise betweenness from
    the artifact's own bits; returns {'approach': ok, 'between': ok}."""
    counts = artifact.counts()
    approach = True
    for cp in artifact.checkpoints:
        n, s = cp["n"], cp["s"]
        num, den = cp["q_num"], cp["q_den"]
        if cp["count"] != int(counts[s]):
            approach = False
        if abs(int(counts[s]) * den - num * s) * (n + 1) > s * den:
            approach = False
    between = True
    cps = artifact.checkpoints
    for (a, b) in zip(cps, cps[1:]):
        lo_r = Fraction(int(counts[a["s"]]), a["s"])
        hi_r = Fraction(int(counts[b["s"]]), b["s"])
        lo_r, hi_r = min(lo_r, hi_r), max(lo_r, hi_r)
        for k in range(a["s"] + 1, b["s"]):
            r = Fraction(int(counts[k]), k)
            if not lo_r <= r <= hi_r:
                between = False
                break
    return {"approach": approach, "between": between}


# -- exact-ratio finite extension ------------------------------------------

@dataclass
class RatioExtension:
    elements: frozenset
    b: int          # the extension is [a, b)
    c: int          # evaluation length with exact ratio
    ratio: Fraction

    def bits(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        for x in self.elements:
            if x < n:
                out[x] = True
        return out


def extend_to_ratio(F, a: int, d: int, r) -> RatioExtension:
    """Extend the finite set F with a run [a, b) so that at some length
    c > d the prefix density is exactly r.

    Picks the smallest b with b > a, b > max(F), |F∪[a,b)| divisible by
    num(r), c = |F∪[a,b)|·den/num an integer > max(d, b−1).  G agrees with
    F below a and G ∩ [a, ∞) is the initial segment [a, b); all three
    follow from the arithmetic, and c exists because c − b grows by
    den − num > 0 along the candidate progression.
    """
    r = Fraction(r)
    if not 0 < r < 1:
        raise ValueError(f"ratio must be in (0,1), got {r}")
    F = frozenset(int(x) for x in F)
    num, den = r.numerator, r.denominator
    b_start = a + 1
    if F:
        b_start = max(b_start, max(F) + 1)
    below_a = sum(1 for x in F if x < a)
    m0 = below_a - a  # |F ∪ [a,b)| = m0 + b for b >= b_start
    # candidate b's form an arithmetic progression mod num
    rem = (-m0) % num
    b = b_start + ((rem - b_start) % num)
    # need c = (m0+b)//num·den > d  and  c >= b
    lb1 = num * (d // den + 1) - m0              # from c > d
    if den > num:
        lb2 = ceil_div(-m0 * den, den - num)     # from c >= b
    else:
        lb2 = 0
    need = max(lb1, lb2)
    if b < need:
        b += ((need - b + num - 1) // num) * num
    size = m0 + b
    c = (size // num) * den
    if not (c > d and c >= b and size % num == 0):
        raise RatioUnrealizable(f"no valid extension for r={r}", requirement=r)
    elements = F | frozenset(range(a, b))
    return RatioExtension(elements, b, c, r)


# -- density transfer through a settling approximation ---------------------

class Delta2Approx:
    """A stage-indexed approximation B_s to a set over a declared window.

    at(s) returns the membership array of B_s over [0, window); answers are
    memoized so the approximation is pure by construction.  Pointwise
    settling is a caller contract.
    """

    def __init__(self, fn, window: int, label=""):
        self._fn = fn
        self.window = window
        self.label = label
        self._memo = {}

    def at(self, s: int) -> np.ndarray:
        if s not in self._memo:
            arr = np.asarray(self._fn(s), dtype=bool)
            if arr.shape != (self.window,):
                raise ContractViolated(
                    f"approximation window {arr.shape} != {(self.window,)}")
            self._memo[s] = arr
        return self._memo[s]

    @staticmethod
    def constant(bits, label="const"):
        bits = np.asarray(bits, dtype=bool)
        return Delta2Approx(lambda s: bits, bits.size, label=label)


def density_transfer_build(B: Delta2Approx, n_checkpoints: int,
                           stage_budget: int, n_max: int):
    """Build a stage enumeration A and a checkpoint map t so that, for
    every index n whose row settled, the prefix density of A at length
    t(n) equals the (clamped) prefix density of B at length n, exactly.

    Stage s+1 finds the least n with the identity currently broken and
    repairs it with extend_to_ratio (target = rho_n(B_s) clamped into
    (0,1): 0 becomes 1/(n+1), 1 becomes n/(n+1)); rows above n are
    re-based past the new evaluation length.  Because repairs only append
    beyond t(n−1), lower settled rows are never disturbed.
    """
    if n_checkpoints >= B.window:
        raise ValueError("n_checkpoints must be below the approximation window")
    t = {0: 0}
    for n in range(1, n_checkpoints + 1):
        t[n] = n + 1
    entry = {}          # element -> stage
    members = set()
    trace = []
    truncated = None
    for s in range(1, stage_budget + 1):
        bs = B.at(s - 1)
        bcounts = np.zeros(B.window + 1, dtype=np.int64)
        np.cumsum(bs, out=bcounts[1:])
        fired = None
        for n in range(1, min(s, n_checkpoints) + 1):
            target = _transfer_target(int(bcounts[n]), n)
            tn = t[n]
            have = sum(1 for x in members if x < tn)
            if have * target.denominator != target.numerator * tn:
                fired = (n, target)
                break
        if fired is None:
            trace.append({"stage": s, "fired": None})
            continue
        n, target = fired
        a = t[n - 1]
        d = max(members | {t[n]}) if members else t[n]
        ext = extend_to_ratio(members, a, d, target)
        if ext.c > n_max:
            truncated = {"error": "Truncated", "stage": s,
                         "detail": f"evaluation length {ext.c} beyond n_max"}
            break
        new = sorted(ext.elements - members)
        for x in new:
            entry[x] = s
        members = set(ext.elements)
        old_c = t[n]
        t[n] = ext.c
        for m in range(n + 1, n_checkpoints + 1):
            t[m] = ext.c + (m - n)
        trace.append({"stage": s, "fired": n, "a": a, "b": ext.b,
                      "c": ext.c, "prev_t": old_c,
                      "target": [target.numerator, target.denominator],
                      "new_elements": len(new)})
    stream = CEStream.from_schedule(entry.items(), n_max=n_max,
                                    stage_max=stage_budget, label="transfer")
    report = _transfer_report(stream, B, t, n_checkpoints, stage_budget)
    if truncated:
        report["diagnostics"] = [truncated]
    return stream, dict(t), trace, report


def _transfer_target(count_n: int, n: int) -> Fraction:
    q = Fraction(count_n, n)
    if q == 0:
        return Fraction(1, n + 1)
    if q == 1:
        return Fraction(n, n + 1)
    return q


def _transfer_report(stream, B, t, n_checkpoints, stage_budget):
    final_b = B.at(stage_budget - 1) if stage_budget >= 1 else B.at(0)
    bcounts = np.zeros(B.window + 1, dtype=np.int64)
    np.cumsum(final_b, out=bcounts[1:])
    members = stream.final_members()
    acounts = np.zeros(stream.n_max + 1, dtype=np.int64)
    np.cumsum(members, out=acounts[1:])
    settled = {}
    segments = {}
    for n in range(1, n_checkpoints + 1):
        tn = t[n]
        target = _transfer_target(int(bcounts[n]), n)
        if tn > stream.n_max:
            settled[n] = None  # out of window, unverifiable
            continue
        settled[n] = bool(int(acounts[tn]) * target.denominator
                          == target.numerator * tn)
        lo = t[n - 1]
        hi = tn
        if hi <= stream.n_max:
            seg = members[lo:hi]
            k = int(np.count_nonzero(seg))
            segments[n] = bool(np.all(seg[:k]) and not seg[k:].any())
    return {"settled_identity": settled, "initial_segment": segments}


# -- factorial-block enumeration with prescribed block densities -----------

FACTORIAL_BLOCK_CAP = 9


class StableMonotoneG:
    """A stage approximation g(n, s), nondecreasing and eventually constant
    in s for each n (the monotone half is checked on the fly)."""

    def __init__(self, fn, label=""):
        self._fn = fn
        self.label = label
        self._last = {}

    def eval(self, n: int, s: int) -> Fraction:
        v = Fraction(self._fn(n, s))
        prev = self._last.get(n)
        if prev is not None and prev[0] <= s and v < prev[1]:
            raise ContractViolated(
                f"g({n},{s}) = {v} dropped below g({n},{prev[0]}) = {prev[1]}")
        if prev is None or s >= prev[0]:
            self._last[n] = (s, v)
        return v


def _round_to_grid(v: Fraction, n: int) -> int:
    """Nearest multiple of 1/n as a numerator L in [0, n]; ties round down."""
    L = ceil_div(v.numerator * n * 2 - v.denominator, 2 * v.denominator)
    return min(max(L, 0), n)


def _factorials(k):
    out = [1]
    for i in range(1, k + 2):
        out.append(out[-1] * i)
    return out


def blockwise_limit_build(g: StableMonotoneG, n_blocks: int,
                          stage_max: int, *, allow_large=False):
    """Enumerate a set over factorial blocks [n!, (n+1)!) so that the final
    density of each block equals g's settled value rounded to the 1/n grid.

    Block n is split into n! runs of length n; a run holds exactly L
    elements (its least ones) when the rounded level is L/n, so the block
    density equals L/n exactly, which in turn pins rho at (n+1)! within
    [−L/n, 1 − L/n]·1/(n+1) of L/n.  Returns (stream, levels) where
    levels[n] is the final grid numerator L.
    """
    if n_blocks > FACTORIAL_BLOCK_CAP and not allow_large:
        raise CapExceeded(
            f"n_blocks={n_blocks} exceeds cap {FACTORIAL_BLOCK_CAP}")
    fact = _factorials(n_blocks)
    n_max = fact[n_blocks + 1]
    entry = np.full(n_max, NEVER, dtype=np.int64)
    levels = {n: 0 for n in range(1, n_blocks + 1)}
    for s in range(stage_max + 1):
        for n in range(1, n_blocks + 1):
            L = _round_to_grid(g.eval(n, s), n)
            if L > levels[n]:
                lo, hi = fact[n], fact[n + 1]
                for run in range(lo, hi, n):
                    entry[run + levels[n]: run + L] = s
                levels[n] = L
    stream = CEStream(entry, stage_max=stage_max, label="blockwise")
    return stream, levels


def verify_blockwise(stream: CEStream, levels: dict) -> dict:
    """Exact checks: block density == L/n, and the rho((n+1)!) sandwich
    −L/n·1/(n+1) <= rho − L/n <= (1 − L/n)·1/(n+1)."""
    members = stream.final_members()
    counts = np.zeros(stream.n_max + 1, dtype=np.int64)
    np.cumsum(members, out=counts[1:])
    fact = _factorials(max(levels) if levels else 1)
    out = {"block_density": True, "sandwich": True}
    for n, L in levels.items():
        lo, hi = fact[n], fact[n + 1]
        blk = int(counts[hi] - counts[lo])
        if blk * n != L * (hi - lo):
            out["block_density"] = False
        rho_hi = Fraction(int(counts[hi]), hi)
        h = Fraction(L, n)
        dlt = rho_hi - h
        if not (-h / (n + 1) <= dlt <= (1 - h) / (n + 1)):
            out["sandwich"] = False
    return out


def limsup_density_build(q_seq, n_blocks: int, stage_max: int):
    """Blockwise build whose level for block n ratchets up to a stage value
    q_s whenever q_s clears the current level by at least 1/(n+1) (and
    s >= n).  The settled level h(n) then satisfies
    b(n) − 1/(n+1) <= h(n) <= b(n) for b(n) = max of q_s over the explored
    stages s >= n — a finite-stage surrogate for the running supremum.
    Returns (stream, levels, g_final) with g_final[n] the pre-rounding
    settled value.
    """
    qs = _seq_to_fn(q_seq)
    g_vals = {n: [Fraction(0)] for n in range(1, n_blocks + 1)}
    for s in range(stage_max):
        q = Fraction(qs(s))
        for n in range(1, n_blocks + 1):
            cur = g_vals[n][-1]
            if s >= n and q >= cur + Fraction(1, n + 1):
                g_vals[n].append(q)
            else:
                g_vals[n].append(cur)
    g = StableMonotoneG(lambda n, s: g_vals[n][min(s, stage_max)],
                        label="ratchet")
    stream, levels = blockwise_limit_build(g, n_blocks, stage_max)
    g_final = {n: g_vals[n][-1] for n in g_vals}
    return stream, levels, g_final


# -- sparse hitting set -----------------------------------------------------

def sparse_hitting_build(roster, n_max: int, stage_max: int):
    """Enumerate at most one element per roster stream: the first element
    of stream e seen to exceed 2^e (by stage, then by value).  The result
    meets every stream that offers such an element and stays logarithmically
    sparse: |S ∩ [0, n)| <= floor(log2 n) + 1 for every n >= 1.
    """
    entry = np.full(n_max, NEVER, dtype=np.int64)
    report = []
    chosen = set()
    for e, stream in enumerate(roster):
        found = None
        for s in range(stream.stage_max + 1):
            # elements with entry stage exactly s, above the threshold
            cand = np.nonzero((stream.entry == s)
                              & (np.arange(stream.n_max) > 2 ** e))[0]
            if cand.size:
                found = (int(cand[0]), s)
                break
        if found is None:
            report.append({"e": e, "hit": None})
            continue
        x, s = found
        if x < n_max and s <= stage_max:
            if x not in chosen:
                entry[x] = min(int(entry[x]), s) if entry[x] != NEVER else s
                chosen.add(x)
            report.append({"e": e, "hit": x, "stage": s})
        else:
            report.append({"e": e, "hit": None,
                           "detail": "witness beyond window/stage budget"})
    stream = CEStream(entry, stage_max=stage_max, label="sparse-hitting")
    return stream, report
