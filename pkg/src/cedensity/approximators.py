"""Computable-subset extraction from stage enumerations.

Each routine consumes a CEStream and returns a SubsetArtifact: an explicit
bitset over the window, the checkpoint/stage data the search committed to,
and the exact integer-form inequalities that data certifies.  Budget
exhaustion yields a *partial* artifact with a diagnostic — a finite window
failing to produce a witness says nothing about the underlying set, so it
is never treated as a hard error at this layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from sortedcontainers import SortedList

from .core import CEStream, NEVER, ceil_div, ceil_sqrt, profile_from_bits
from .errors import BudgetExceeded, PreconditionViolated


@dataclass
class SubsetArtifact:
    """An extracted computable subset plus its certification data.

    ``guarantee`` describes the inequality family the artifact certifies
    (with every number needed to re-check it); ``checkpoints`` carry the
    committed search results; ``diagnostics`` record budget exhaustion.
    """

    kind: str
    bits: np.ndarray
    checkpoints: list = field(default_factory=list)
    guarantee: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return self.bits.size

    def counts(self) -> np.ndarray:
        out = np.zeros(self.n_max + 1, dtype=np.int64)
        np.cumsum(self.bits, out=out[1:])
        return out

    def profile(self):
        return profile_from_bits(self.bits, label=self.kind)

    def is_subset_of(self, stream: CEStream) -> bool:
        """Scan check: every selected element was eventually enumerated."""
        final = stream.final_members()[: self.n_max]
        return bool(np.all(final | ~self.bits))


def _as_fraction(q) -> Fraction:
    q = Fraction(q)
    return q


def _first_pair_search(stream: CEStream, s_lo: int, threshold_k):
    """First (s, t) in dovetail order (s + t ascending, ties by smaller s)
    with s > s_lo, t <= stage_max, and at least threshold_k(s) elements of
    [s_lo, s) enumerated by stage t.

    For each s the least workable t is an order statistic of the entry
    stages seen so far, so the scan keeps a sorted window and stops as soon
    as no remaining s can beat the best cost (cost = s + t >= s).
    """
    entry = stream.entry
    window = SortedList()
    best = None  # (cost, s, t, count_needed)
    s = s_lo
    while True:
        s += 1
        if s > stream.n_max:
            break
        if best is not None and s >= best[0]:
            break
        e = int(entry[s - 1])
        if e != NEVER:
            window.add(e)
        k = threshold_k(s)
        if k <= 0:
            t = 0
        elif len(window) >= k:
            t = window[k - 1]
        else:
            continue
        if t > stream.stage_max:
            continue
        cost = s + t
        if best is None or cost < best[0]:
            best = (cost, s, t, max(k, 0))
    if best is None:
        return None
    _, s, t, k = best
    return s, t, k


def checkpoint_subset(stream: CEStream, q) -> SubsetArtifact:
    """Extract a computable B ⊆ A with certified prefix density >= q.

    Checkpoints (s_0, t_0) = (0, 0) and each (s_{n+1}, t_{n+1}) the first
    pair with s > s_n and at least ceil(q·s) elements of [s_n, s) in A_t
    (i.e. the block density condition in exact integers); the block
    [s_n, s_{n+1}) of B copies A_{t_{n+1}}.  Certifies
    count_B(s_{n+1}) · den(q) >= num(q) · s_{n+1} at every checkpoint.
    """
    q = _as_fraction(q)
    if not 0 < q < 1:
        raise ValueError(f"q must be in (0,1), got {q}")
    entry = stream.entry
    bits = np.zeros(stream.n_max, dtype=bool)
    checkpoints = [{"s": 0, "t": 0, "count": 0}]
    diagnostics = []
    s_n = 0
    running = 0
    while True:
        found = _first_pair_search(
            stream, s_n, lambda s: ceil_div(q.numerator * s, q.denominator))
        if found is None:
            diagnostics.append({
                "error": "BudgetExceeded",
                "detail": "no next checkpoint pair within the window/stage budget",
                "after_checkpoint": len(checkpoints) - 1,
            })
            break
        s_next, t_next, _k = found
        block = entry[s_n:s_next] <= t_next
        bits[s_n:s_next] = block
        running += int(np.count_nonzero(block))
        checkpoints.append({"s": s_next, "t": t_next, "count": running})
        s_n = s_next
        if s_n >= stream.n_max:
            break
    guarantee = {
        "form": "checkpoint-ratio",
        "q_num": q.numerator,
        "q_den": q.denominator,
        # count · den >= num · s at every checkpoint with s >= 1
    }
    return SubsetArtifact("checkpoint_subset", bits, checkpoints, guarantee,
                          diagnostics, meta={"stream": stream.label})


def tracking_checkpoint_subset(stream: CEStream, q_seq) -> SubsetArtifact:
    """Checkpoint extraction whose target ratio is read off a rational
    sequence indexed by stage (the caller asserts the sequence tracks the
    upper density of A; that limit claim is recorded, never checked).

    The pair search for checkpoint n+1 demands s > s_n, t > n, and at
    least ceil((q_t − 2^{−n})·s) elements of [s_n, s) in A_t.  The slack
    term is what the search can actually promise, so the certified
    inequality is count_B(s_{n+1}) >= ceil((q_{t_{n+1}} − 2^{−n})·s_{n+1});
    whether the unslacked bound count >= ceil(q_{t_{n+1}}·s_{n+1}) also
    held is recorded per checkpoint as an observation.
    """
    qs = _seq_to_fn(q_seq)
    entry = stream.entry
    bits = np.zeros(stream.n_max, dtype=bool)
    checkpoints = [{"s": 0, "t": 0, "count": 0}]
    diagnostics = []
    s_n = 0
    running = 0
    n = 0
    while True:
        found = _tracking_pair_search(stream, s_n, n, qs)
        if found is None:
            diagnostics.append({
                "error": "BudgetExceeded",
                "detail": "no next checkpoint pair within the window/stage budget",
                "after_checkpoint": n,
            })
            break
        s_next, t_next = found
        block = entry[s_n:s_next] <= t_next
        bits[s_n:s_next] = block
        running += int(np.count_nonzero(block))
        target = Fraction(qs(t_next))
        strict_ok = (running * target.denominator
                     >= target.numerator * s_next)
        checkpoints.append({
            "s": s_next, "t": t_next, "count": running,
            "target_num": target.numerator, "target_den": target.denominator,
            "slack_pow": n, "observed_unslacked": bool(strict_ok),
        })
        s_n = s_next
        n += 1
        if s_n >= stream.n_max:
            break
    guarantee = {"form": "tracking-checkpoint-ratio"}
    return SubsetArtifact("tracking_checkpoint_subset", bits, checkpoints,
                          guarantee, diagnostics, meta={"stream": stream.label})


def _tracking_pair_search(stream: CEStream, s_lo: int, n: int, qs):
    """Dovetail search where the required count depends on t via q_t."""
    entry = stream.entry
    window = SortedList()
    best = None  # (cost, s, t)
    slack = Fraction(1, 2 ** n)
    s = s_lo
    while True:
        s += 1
        if s > stream.n_max:
            break
        if best is not None and s + n + 1 >= best[0]:
            break
        e = int(entry[s - 1])
        if e != NEVER:
            window.add(e)
        t_hi = stream.stage_max if best is None else min(stream.stage_max,
                                                         best[0] - s - 1)
        t = _least_workable_t(window, qs, slack, s, n, t_hi)
        if t is not None:
            cost = s + t
            if best is None or cost < best[0]:
                best = (cost, s, t)
    if best is None:
        return None
    return best[1], best[2]


def _least_workable_t(window, qs, slack, s, n, t_hi):
    """Smallest t in (n, t_hi] with |window ∩ [0, t]| >= ceil((q_t − slack)·s),
    or None.  Larger t only raises the dovetail cost at fixed s, so the
    first hit is the only one worth keeping."""
    settle = getattr(qs, "settle_at", None)
    vary_hi = t_hi if settle is None else min(settle - 1, t_hi)
    for t in range(n + 1, vary_hi + 1):
        thr = Fraction(qs(t)) - slack
        if window.bisect_right(t) >= ceil_div(thr.numerator * s,
                                              thr.denominator):
            return t
    if settle is None:
        return None
    # q_t is constant from settle on: the count requirement is fixed, and
    # |window ∩ [0, t]| first reaches k at the k-th smallest entry stage
    lo_t = max(n + 1, settle)
    if lo_t > t_hi:
        return None
    thr = Fraction(qs(lo_t)) - slack
    k = ceil_div(thr.numerator * s, thr.denominator)
    if k <= 0:
        return lo_t
    if k > len(window):
        return None
    t = max(lo_t, int(window[k - 1]))
    return t if t <= t_hi else None


def _seq_to_fn(q_seq):
    if callable(q_seq):
        return q_seq
    seq = [Fraction(v) for v in q_seq]

    def fn(i):
        return seq[i] if i < len(seq) else seq[-1]

    fn.settle_at = len(seq) - 1  # constant from this index on
    return fn


# -- look-ahead family ---------------------------------------------------

def _stage_table_kth(stream: CEStream, need_fn, n_lo: int):
    """s(n) for n in [n_lo, n_max]: the need_fn(n)-th smallest entry stage
    among [0, n).  Returns (s_table, None) or (None, bad_n) when some n has
    fewer enumerated elements than needed (precondition failure point)."""
    entry = stream.entry
    window = SortedList(int(e) for e in entry[:n_lo] if e != NEVER)
    s_table = np.zeros(stream.n_max - n_lo + 1, dtype=np.int64)
    for n in range(n_lo, stream.n_max + 1):
        if n > n_lo:
            e = int(entry[n - 1])
            if e != NEVER:
                window.add(e)
        k = need_fn(n)
        if k <= 0:
            s_table[n - n_lo] = 0
            continue
        if len(window) < k:
            return None, n
        s_table[n - n_lo] = window[k - 1]
    return s_table, None


def _lookahead_bits(stream: CEStream, s_table: np.ndarray, n_lo: int):
    """B = {k : k ∈ A_{t(k)}} with t(k) = max s(n) over n0 <= n <= min(k², n_max).

    Truncating the range at the window end only lowers t(k) for k past the
    window's square root, and every window-level inequality below depends
    only on s(n) for in-window n, which those k still dominate.
    """
    n_max = stream.n_max
    bits = np.zeros(n_max, dtype=bool)
    t_of_k = np.zeros(n_max, dtype=np.int64)
    t = 0
    reach = n_lo - 1  # largest n whose s(n) is folded into t so far
    for k in range(n_max):
        hi = min(k * k, n_max)
        while reach < hi:
            reach += 1
            sv = int(s_table[reach - n_lo])
            if sv > t:
                t = sv
        t_of_k[k] = t
        e = stream.entry[k]
        bits[k] = e != NEVER and e <= t
    return bits, t_of_k


def _margin_guarantee_holds(bits, stream, s_table, n_lo):
    """counts_B[n] >= |A_{s(n)} ∩ [0,n)| − ceil_sqrt(n) for all window n,
    returned with the first violating n (None if none — expected)."""
    counts_b = np.zeros(stream.n_max + 1, dtype=np.int64)
    np.cumsum(bits, out=counts_b[1:])
    window = SortedList()
    entries = [int(e) for e in stream.entry[:n_lo] if e != NEVER]
    window.update(entries)
    for n in range(n_lo, stream.n_max + 1):
        if n > n_lo:
            e = int(stream.entry[n - 1])
            if e != NEVER:
                window.add(e)
        s_n = int(s_table[n - n_lo])
        in_a = window.bisect_right(s_n)
        if counts_b[n] < in_a - ceil_sqrt(n):
            return n
    return None


def lookahead_subset(stream: CEStream, q, n0: int = 1) -> SubsetArtifact:
    """Extract B ⊆ A certified within a 1/√n margin of the target q.

    Requires (and verifies on the window) that the fully enumerated set
    satisfies count(n) >= ceil(q·n) for all n >= n0.  s(n) is the least
    stage at which [0, n) already holds ceil(q·n) elements; the per-element
    commitment stage t(k) looks ahead over all n up to k², which is what
    makes the margin √n instead of a constant.  Certifies, in integers,
    counts_B[n] >= ceil(q·n) − ceil_sqrt(n) (via the stronger
    counts_B[n] >= |A_{s(n)} ∩ [0,n)| − ceil_sqrt(n)) for all n in
    [n0, n_max].
    """
    q = _as_fraction(q)
    if not 0 < q < 1:
        raise ValueError(f"q must be in (0,1), got {q}")
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    final_counts = np.zeros(stream.n_max + 1, dtype=np.int64)
    np.cumsum(stream.final_members(), out=final_counts[1:])
    ns = np.arange(n0, stream.n_max + 1, dtype=np.int64)
    bad = np.nonzero(final_counts[n0:] * q.denominator < q.numerator * ns)[0]
    if bad.size:
        n_bad = int(ns[bad[0]])
        raise PreconditionViolated(
            f"density target {q} fails at n={n_bad}: "
            f"count={int(final_counts[n_bad])}", at=n_bad)

    s_table, missing = _stage_table_kth(
        stream, lambda n: ceil_div(q.numerator * n, q.denominator), n0)
    assert missing is None  # precondition scan above rules this out
    bits, t_of_k = _lookahead_bits(stream, s_table, n0)
    viol = _margin_guarantee_holds(bits, stream, s_table, n0)
    guarantee = {
        "form": "lookahead-margin",
        "q_num": q.numerator, "q_den": q.denominator, "n0": n0,
        "s_table": [int(v) for v in s_table],
        "holds": viol is None, "first_violation": viol,
    }
    return SubsetArtifact("lookahead_subset", bits,
                          checkpoints=[{"t_of_k_tail": int(t_of_k[-1])}],
                          guarantee=guarantee,
                          meta={"stream": stream.label})


# -- witnessed density-1 extraction ---------------------------------------

def _binding_level(w_vals, n):
    """h(n): the largest z <= n with w(z) <= n, under w(0) = 0."""
    h = 0
    for z in range(1, min(n, len(w_vals) - 1) + 1):
        if w_vals[z] <= n:
            h = z
    return h


def _need_for_level(n: int, h: int) -> int:
    # ceil(n · (2^h − 1) / 2^h)
    p = 1 << h
    return ceil_div(n * (p - 1), p)


def witnessed_subset(stream: CEStream, w) -> SubsetArtifact:
    """Extraction driven by a density-1 witness function w.

    w promises count(n) >= ceil(n·(1 − 2^{−k})) for every n >= w(k); the
    convention w(0) = 0 is imposed.  The promise is verified on the window
    (violation raises PreconditionViolated).  With h(n) the strongest level
    active at n, s(n) is the least stage at which [0, n) holds the promised
    count for level h(n); t(k) looks ahead to k² as in lookahead_subset.
    Certifies counts_B[n] >= ceil(n·(2^{h(n)}−1)/2^{h(n)}) − ceil_sqrt(n).
    """
    n_max = stream.n_max
    w_vals = [0]
    z = 1
    while True:
        wz = int(w(z))
        if wz < w_vals[-1]:
            raise PreconditionViolated(f"witness not nondecreasing at k={z}")
        if wz > n_max or z > n_max:
            break
        w_vals.append(wz)
        z += 1
    # h per n via a forward sweep (w nondecreasing => active levels nest)
    h_of_n = np.zeros(n_max + 1, dtype=np.int64)
    lvl = 0
    for n in range(1, n_max + 1):
        while lvl + 1 < len(w_vals) and lvl + 1 <= n and w_vals[lvl + 1] <= n:
            lvl += 1
        h_of_n[n] = min(lvl, n)

    final_counts = np.zeros(n_max + 1, dtype=np.int64)
    np.cumsum(stream.final_members(), out=final_counts[1:])
    for n in range(1, n_max + 1):
        if final_counts[n] < _need_for_level(n, int(h_of_n[n])):
            raise PreconditionViolated(
                f"witness promise fails at n={n} (level {int(h_of_n[n])})",
                at=n)

    s_table, missing = _stage_table_kth(
        stream, lambda n: _need_for_level(n, int(h_of_n[n])), 1)
    assert missing is None
    bits, _ = _lookahead_bits(stream, s_table, 1)
    counts_b = np.zeros(n_max + 1, dtype=np.int64)
    np.cumsum(bits, out=counts_b[1:])
    viol = None
    for n in range(1, n_max + 1):
        if counts_b[n] < _need_for_level(n, int(h_of_n[n])) - ceil_sqrt(n):
            viol = n
            break
    guarantee = {
        "form": "witness-margin",
        "h_of_n": [int(v) for v in h_of_n[1:]],
        "s_table": [int(v) for v in s_table],
        "holds": viol is None, "first_violation": viol,
    }
    return SubsetArtifact("witnessed_subset", bits, guarantee=guarantee,
                          meta={"stream": stream.label})


class LimitApprox:
    """A stage-indexed approximation g(k, s) asserted (by the caller) to be
    eventually constant in s for each k.  Answers are memoized so repeated
    queries are pure by construction."""

    def __init__(self, fn, label=""):
        self._fn = fn
        self._memo = {}
        self.label = label

    def eval(self, k: int, s: int):
        key = (k, s)
        if key not in self._memo:
            self._memo[key] = self._fn(k, s)
        return self._memo[key]


def _guarded_stage_table(stream: CEStream, n_max, threshold_need):
    """s(n) = least s >= n such that, for the strongest guard level active
    at (n, s), the required count is already enumerated below n.

    threshold_need(n, s) -> required count (the guards collapse to their
    maximum active level since the requirement grows with the level).
    Raises BudgetExceeded(n) when no s <= stage_max works.
    """
    entry = stream.entry
    s_table = np.zeros(n_max + 1, dtype=np.int64)
    sorted_prefix = SortedList()
    for n in range(1, n_max + 1):
        e = int(entry[n - 1])
        if e != NEVER:
            sorted_prefix.add(e)
        s = n
        while True:
            if s > stream.stage_max:
                raise BudgetExceeded(
                    f"guarded stage search exhausted at n={n}", at=n)
            need = threshold_need(n, s)
            if sorted_prefix.bisect_right(s) >= need:
                break
            s += 1
        s_table[n] = s
    return s_table


def limit_witness_subset(stream: CEStream, g: LimitApprox) -> SubsetArtifact:
    """Extraction when the density-1 witness is only known in the limit.

    g(k, s) approximates a witness function; the stage search for s(n) is
    guarded: a level k <= n binds at stage s only if g(k, s) <= n, and then
    [0, n) must already hold ceil(n·(1 − 2^{−k})) elements at stage s.
    Because nothing here is verified against the true limit, the guarantee
    is relative: counts_B[n] >= |A_{s(n)} ∩ [0,n)| − ceil_sqrt(n).
    """
    n_max = stream.n_max

    def need(n, s):
        h = 0
        for k in range(n, 0, -1):
            if int(g.eval(k, s)) <= n:
                h = k
                break
        return _need_for_level(n, h)

    s_table_full = _guarded_stage_table(stream, n_max, need)
    s_table = s_table_full[1:]
    bits, _ = _lookahead_bits(stream, s_table, 1)
    viol = _margin_guarantee_holds(bits, stream, s_table, 1)
    guarantee = {
        "form": "lookahead-margin-relative",
        "s_table": [int(v) for v in s_table],
        "holds": viol is None, "first_violation": viol,
    }
    return SubsetArtifact("limit_witness_subset", bits, guarantee=guarantee,
                          meta={"stream": stream.label, "g": g.label})


def tracked_witness_subset(stream: CEStream, q_seq,
                           g: LimitApprox) -> SubsetArtifact:
    """Extraction toward a per-n rational target sequence q_n with a
    limit-approximated witness: level k binds at (n, s) when g(k, s) <= n,
    demanding count(n at s) >= ceil((q_n − 2^{−k})·n).  Guarantee is the
    same relative margin as limit_witness_subset.
    """
    qs = _seq_to_fn(q_seq)
    n_max = stream.n_max

    def need(n, s):
        k_bind = None
        for k in range(n, 0, -1):
            if int(g.eval(k, s)) <= n:
                k_bind = k
                break
        if k_bind is None:
            return 0
        thr = Fraction(qs(n)) - Fraction(1, 1 << k_bind)
        if thr <= 0:
            return 0
        return ceil_div(thr.numerator * n, thr.denominator)

    s_table_full = _guarded_stage_table(stream, n_max, need)
    s_table = s_table_full[1:]
    bits, _ = _lookahead_bits(stream, s_table, 1)
    viol = _margin_guarantee_holds(bits, stream, s_table, 1)
    guarantee = {
        "form": "lookahead-margin-relative",
        "s_table": [int(v) for v in s_table],
        "holds": viol is None, "first_violation": viol,
    }
    return SubsetArtifact("tracked_witness_subset", bits, guarantee=guarantee,
                          meta={"stream": stream.label, "g": g.label})
