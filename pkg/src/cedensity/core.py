"""Set oracles, exact density profiles, and the dyadic valuation classes.

All density values are exact rationals (``fractions.Fraction``); floats
appear only as convenience columns in CSV output.  Profiles are reported
over an explicit finite window [1, n_max] and never claim limit values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt

import numpy as np

from .errors import BudgetExceeded, InvalidResidue, InvalidWindow

DEFAULT_STEP_BUDGET = 10**6


@dataclass(frozen=True)
class Universe:
    """Finite evaluation horizon: elements in [0, n_max), stages in [0, stage_max]."""

    n_max: int
    stage_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise InvalidWindow(f"n_max must be >= 1, got {self.n_max}")
        if self.stage_max < 1:
            raise InvalidWindow(f"stage_max must be >= 1, got {self.stage_max}")


class SetOracle:
    """A pure membership predicate over the naturals.

    ``fn`` decides membership of a single natural.  ``batch`` optionally
    produces the whole membership array over [0, n) in one vectorized call;
    when absent, the scalar predicate is mapped.  ``steps_fn`` models the
    abstract cost of a rule query: if it reports more than ``step_budget``
    steps for some n, the query raises BudgetExceeded instead of silently
    answering non-member.
    """

    def __init__(self, fn, *, kind="rule", label="", batch=None,
                 steps_fn=None, step_budget=DEFAULT_STEP_BUDGET):
        self._fn = fn
        self._batch = batch
        self._steps_fn = steps_fn
        self.kind = kind
        self.label = label
        self.step_budget = step_budget

    def contains(self, n: int) -> bool:
        if self._steps_fn is not None and self._steps_fn(n) > self.step_budget:
            raise BudgetExceeded(f"step budget exhausted deciding membership of {n}", at=n)
        return bool(self._fn(n))

    __contains__ = contains

    def membership_array(self, n: int) -> np.ndarray:
        """Membership of [0, n) as a boolean array."""
        if self._batch is not None and self._steps_fn is None:
            out = np.asarray(self._batch(n), dtype=bool)
            if out.shape != (n,):
                raise ValueError("batch membership returned wrong shape")
            return out
        return np.fromiter((self.contains(i) for i in range(n)), dtype=bool, count=n)

    # -- constructors -------------------------------------------------

    @staticmethod
    def empty(label="empty"):
        return SetOracle(lambda n: False, kind="rule", label=label,
                         batch=lambda n: np.zeros(n, dtype=bool))

    @staticmethod
    def naturals(label="omega"):
        return SetOracle(lambda n: True, kind="rule", label=label,
                         batch=lambda n: np.ones(n, dtype=bool))

    @staticmethod
    def explicit(elements, label="explicit"):
        elems = frozenset(int(x) for x in elements)
        arr = np.array(sorted(elems), dtype=np.int64) if elems else np.empty(0, np.int64)

        def batch(n):
            out = np.zeros(n, dtype=bool)
            out[arr[arr < n]] = True
            return out

        return SetOracle(lambda n: n in elems, kind="explicit-bitset",
                         label=label, batch=batch)

    @staticmethod
    def from_bits(bits, label="bitset"):
        bits = np.asarray(bits, dtype=bool)

        def batch(n):
            if n > bits.size:
                raise InvalidWindow(f"bitset covers [0, {bits.size}), asked for {n}")
            return bits[:n]

        return SetOracle(lambda n: bool(bits[n]), kind="explicit-bitset",
                         label=label, batch=batch)

    @staticmethod
    def residue_union(m: int, residues, label=None):
        if m < 1:
            raise InvalidResidue(f"modulus must be >= 1, got {m}")
        rs = sorted(set(int(r) for r in residues))
        for r in rs:
            if not 0 <= r < m:
                raise InvalidResidue(f"residue {r} outside [0, {m})")
        rset = frozenset(rs)
        mask = np.zeros(m, dtype=bool)
        mask[rs] = True

        def batch(n):
            return mask[np.arange(n, dtype=np.int64) % m]

        return SetOracle(lambda n: (n % m) in rset, kind="residue-union",
                         label=label or f"residues{rs}mod{m}", batch=batch)

    @staticmethod
    def complement(inner, label=None):
        batch = None
        if inner._batch is not None:
            batch = lambda n: ~inner.membership_array(n)
        return SetOracle(lambda n: not inner.contains(n), kind=inner.kind,
                         label=label or f"co({inner.label})", batch=batch)

    @staticmethod
    def union(a, b, label=None):
        batch = None
        if a._batch is not None and b._batch is not None:
            batch = lambda n: a.membership_array(n) | b.membership_array(n)
        return SetOracle(lambda n: a.contains(n) or b.contains(n), kind="rule",
                         label=label or f"({a.label})|({b.label})", batch=batch)


# -- dyadic valuation classes ------------------------------------------

def trailing_zeros(m: int) -> int:
    """Number of trailing zero bits of m > 0 (the dyadic valuation)."""
    if m <= 0:
        raise ValueError("trailing_zeros needs m > 0")
    return (m & -m).bit_length() - 1


def dyadic_class(k: int, label=None) -> SetOracle:
    """The set of m > 0 whose dyadic valuation is exactly k.

    Equivalently m % 2^(k+1) == 2^k, a single residue class of exact
    asymptotic density 2^-(k+1).
    """
    if k < 0:
        raise ValueError("class index must be >= 0")
    return SetOracle.residue_union(2 ** (k + 1), [2 ** k],
                                   label=label or f"dyadic[{k}]")


def dyadic_union(spec, *, include_zero=False, label="dyadic-union") -> SetOracle:
    """Union of dyadic classes selected by ``spec``.

    ``spec`` is either a finite iterable of class indices or a predicate on
    indices (so infinite index sets are expressible as rules).  Membership
    of m > 0 tests the class of its trailing-zero count; 0 belongs to no
    class and is included only when ``include_zero`` is set.
    """
    if callable(spec):
        pred = spec
        fin = None
    else:
        fin = frozenset(int(k) for k in spec)
        pred = fin.__contains__

    def fn(n):
        if n == 0:
            return include_zero
        return bool(pred(trailing_zeros(n)))

    def batch(n):
        if n == 0:
            return np.zeros(0, dtype=bool)
        idx = np.arange(n, dtype=np.int64)
        out = np.zeros(n, dtype=bool)
        if n > 1:
            body = idx[1:]
            tz = np.log2(body & -body).astype(np.int64)  # exact: powers of two
            kmax = int(tz.max())
            table = np.fromiter((bool(pred(k)) for k in range(kmax + 1)),
                                dtype=bool, count=kmax + 1)
            out[1:] = table[tz]
        out[0] = include_zero
        return out

    if fin is not None:
        label = f"{label}{sorted(fin)}"
    return SetOracle(fn, kind="rk-union", label=label, batch=batch)


def dyadic_union_from_binary(bits, *, label="dyadic-binary") -> SetOracle:
    """Union of dyadic classes from a binary expansion .b0 b1 b2 ...

    ``bits`` is a sequence or predicate giving digit i of a real in (0,1);
    the resulting set collects class i exactly when b_i = 1, so its density
    equals the expanded real.
    """
    if callable(bits):
        return dyadic_union(lambda k: bits(k) == 1, label=label)
    seq = [int(b) for b in bits]
    return dyadic_union(lambda k: k < len(seq) and seq[k] == 1, label=label)


def binary_expansion_of(r: Fraction, digits: int):
    """First ``digits`` binary digits of r in (0,1), favouring the infinite
    expansion for dyadic rationals (trailing ones)."""
    if not 0 < r < 1:
        raise ValueError("expansion defined for r in (0,1)")
    out = []
    x = r
    for _ in range(digits):
        x *= 2
        if x > 1 or (x == 1 and len(out) + 1 == digits):
            out.append(1)
            x -= 1
        elif x == 1:
            # dyadic tail: emit 0 here and ones forever after
            out.append(0)
            out.extend([1] * (digits - len(out)))
            return out
        else:
            out.append(0)
    return out


# -- profiles ----------------------------------------------------------

@dataclass
class DensityProfile:
    """Cumulative counts of a set over [0, n_max).

    counts[n] = |S ∩ [0, n)| for 0 <= n <= n_max (counts[0] = 0), so the
    prefix density at n >= 1 is the exact rational counts[n] / n.
    """

    counts: np.ndarray
    label: str = ""

    @property
    def n_max(self) -> int:
        return self.counts.size - 1

    def count(self, n: int) -> int:
        self._check(n)
        return int(self.counts[n])

    def rho(self, n: int) -> Fraction:
        self._check(n)
        return Fraction(int(self.counts[n]), n)

    def _check(self, n):
        if not 1 <= n <= self.n_max:
            raise InvalidWindow(f"n={n} outside [1, {self.n_max}]")

    def window_bounds(self, lo: int, hi: int) -> tuple[Fraction, Fraction]:
        """Exact (min, max) of the prefix density over n in [lo, hi].

        These are window estimators only; no asymptotic quantity is claimed.
        """
        if not 1 <= lo <= hi <= self.n_max:
            raise InvalidWindow(f"window [{lo}, {hi}] invalid for n_max={self.n_max}")
        ns = np.arange(lo, hi + 1, dtype=np.float64)
        ratios = self.counts[lo:hi + 1].astype(np.float64) / ns
        lo_val = self._exact_extreme(ratios, lo, minimum=True)
        hi_val = self._exact_extreme(ratios, lo, minimum=False)
        return lo_val, hi_val

    def _exact_extreme(self, ratios, offset, *, minimum):
        # float prefilter, exact rational tie-break among near-extremal n
        target = ratios.min() if minimum else ratios.max()
        cand = np.nonzero(np.abs(ratios - target) <= 1e-9)[0]
        best = None
        for i in cand:
            n = int(i) + offset
            v = Fraction(int(self.counts[n]), n)
            if best is None or (v < best if minimum else v > best):
                best = v
        return best

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "count", "rho_num", "rho_den", "rho_float"])
            for n in range(1, self.n_max + 1):
                r = Fraction(int(self.counts[n]), n)
                w.writerow([n, int(self.counts[n]), r.numerator, r.denominator,
                            repr(float(r))])


def prefix_count(oracle: SetOracle, n: int) -> int:
    """|S ∩ [0, n)| by direct evaluation."""
    if n < 1:
        raise InvalidWindow(f"n must be >= 1, got {n}")
    if oracle._batch is not None and oracle._steps_fn is None:
        return int(np.count_nonzero(oracle.membership_array(n)))
    return sum(1 for i in range(n) if oracle.contains(i))


def rho(oracle: SetOracle, n: int) -> Fraction:
    """Exact prefix density |S ∩ [0, n)| / n in lowest terms."""
    return Fraction(prefix_count(oracle, n), n)


def density_profile(oracle: SetOracle, n_max: int, label=None) -> DensityProfile:
    """Single-pass cumulative profile of the oracle over [0, n_max)."""
    if n_max < 1:
        raise InvalidWindow(f"n_max must be >= 1, got {n_max}")
    member = oracle.membership_array(n_max)
    counts = np.zeros(n_max + 1, dtype=np.int64)
    np.cumsum(member, out=counts[1:])
    return DensityProfile(counts, label=label if label is not None else oracle.label)


def profile_from_bits(bits, label="") -> DensityProfile:
    bits = np.asarray(bits, dtype=bool)
    counts = np.zeros(bits.size + 1, dtype=np.int64)
    np.cumsum(bits, out=counts[1:])
    return DensityProfile(counts, label=label)


def window_bounds(profile: DensityProfile, lo: int, hi: int):
    return profile.window_bounds(lo, hi)


def residue_union_density(m: int, residues) -> Fraction:
    """Exact asymptotic density |residues| / m of a union of residue classes.

    The union's prefix density equals this value exactly at every multiple
    of m (see ``verify_periodic_density``).
    """
    if m < 1:
        raise InvalidResidue(f"modulus must be >= 1, got {m}")
    rs = set(int(r) for r in residues)
    for r in rs:
        if not 0 <= r < m:
            raise InvalidResidue(f"residue {r} outside [0, {m})")
    return Fraction(len(rs), m)


def verify_periodic_density(m: int, residues, k_multiples: int) -> bool:
    """Check rho at n = m, 2m, ..., k·m equals |residues|/m exactly."""
    oracle = SetOracle.residue_union(m, residues)
    want = residue_union_density(m, residues)
    prof = density_profile(oracle, m * k_multiples)
    return all(prof.rho(m * k) == want for k in range(1, k_multiples + 1))


def ceil_sqrt(n: int) -> int:
    """Smallest integer c with c*c >= n (integer-only square-root ceiling)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    c = isqrt(n)
    return c if c * c == n else c + 1


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


# -- stage enumerations --------------------------------------------------

NEVER = np.iinfo(np.int64).max
"""Sentinel entry stage for elements never enumerated within the horizon."""


class CEStream:
    """A monotone stage-indexed enumeration s -> A_s of a set.

    Concretely a map from each element of [0, n_max) to the stage at which
    it enters the set (``NEVER`` if it does not).  A_s = {m : entry[m] <= s}.
    Stage indices run over [0, stage_max].
    """

    def __init__(self, entry_stage: np.ndarray, *, stage_max: int, label=""):
        entry = np.asarray(entry_stage, dtype=np.int64)
        if entry.ndim != 1 or entry.size < 1:
            raise InvalidWindow("entry-stage table must be a nonempty 1-d array")
        if entry.min() < 0:
            raise ValueError("entry stages must be >= 0")
        live = entry[entry != NEVER]
        if live.size and int(live.max()) > stage_max:
            raise ValueError("entry stage exceeds stage_max")
        self.entry = entry
        self.stage_max = int(stage_max)
        self.label = label

    @property
    def n_max(self) -> int:
        return self.entry.size

    def member_at(self, m: int, s: int) -> bool:
        """Whether m is in A_s."""
        return bool(self.entry[m] <= s)

    def snapshot(self, s: int) -> np.ndarray:
        """Membership array of A_s over [0, n_max)."""
        return self.entry <= s

    def final_members(self) -> np.ndarray:
        return self.snapshot(self.stage_max)

    def count_at(self, n: int, s: int) -> int:
        """|A_s ∩ [0, n)|."""
        return int(np.count_nonzero(self.entry[:n] <= s))

    def final_oracle(self) -> SetOracle:
        bits = self.final_members()
        return SetOracle.from_bits(bits, label=f"{self.label}@final")

    @staticmethod
    def from_schedule(pairs, *, n_max: int, stage_max: int, label=""):
        """Build from (element, stage) pairs; elements outside [0, n_max)
        or stages beyond stage_max are dropped (outside the horizon)."""
        entry = np.full(n_max, NEVER, dtype=np.int64)
        for m, s in pairs:
            m, s = int(m), int(s)
            if not (0 <= m < n_max) or s > stage_max:
                continue
            if s < 0:
                raise ValueError(f"negative stage for element {m}")
            if entry[m] != NEVER and entry[m] != s:
                raise ValueError(f"element {m} enumerated at two stages")
            entry[m] = s
        return CEStream(entry, stage_max=stage_max, label=label)

    @staticmethod
    def from_stage_fn(stage_fn, *, n_max: int, stage_max: int, label=""):
        """stage_fn(m) -> entry stage of m, or None for never."""
        entry = np.full(n_max, NEVER, dtype=np.int64)
        for m in range(n_max):
            s = stage_fn(m)
            if s is None or s > stage_max:
                continue
            entry[m] = int(s)
        return CEStream(entry, stage_max=stage_max, label=label)

    @staticmethod
    def from_oracle(oracle: SetOracle, *, n_max: int, stage_max: int,
                    delay_fn=None, label=None):
        """Enumerate the oracle's members; element m enters at stage
        delay_fn(m) (default m, the canonical 'appears at its own value'
        schedule)."""
        member = oracle.membership_array(n_max)
        entry = np.full(n_max, NEVER, dtype=np.int64)
        for m in np.nonzero(member)[0]:
            s = int(m) if delay_fn is None else int(delay_fn(int(m)))
            if s <= stage_max:
                entry[m] = s
        return CEStream(entry, stage_max=stage_max,
                        label=label if label is not None else oracle.label)


def stage_profile(stream: CEStream, s: int) -> DensityProfile:
    """Density profile of the stage-s snapshot A_s."""
    return profile_from_bits(stream.snapshot(s), label=f"{stream.label}@{s}")
