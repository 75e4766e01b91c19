"""Artifact files: run-length-encoded bitsets, checkpoint and guarantee
records, and an integrity digest.

Verification is two-layered: the digest catches any byte-level corruption
(including bit flips that would otherwise *strengthen* an inequality and
slip past a semantic re-check), and ``verify_payload`` re-derives every
certified inequality from the stored bitset and numbers.
"""

from __future__ import annotations

import csv
import hashlib
import json
from fractions import Fraction

import numpy as np

from .approximators import SubsetArtifact
from .core import ceil_div, ceil_sqrt
from .errors import ArtifactError

FORMAT_VERSION = 1


def bits_to_rle(bits) -> list:
    """Run lengths of an alternating 0/1 sequence, starting with the length
    of the initial zero run (possibly 0)."""
    bits = np.asarray(bits, dtype=bool)
    if bits.size == 0:
        return []
    flips = np.nonzero(bits[1:] != bits[:-1])[0] + 1
    edges = np.concatenate(([0], flips, [bits.size]))
    runs = np.diff(edges).tolist()
    if bits[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_to_bits(runs, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=bool)
    pos = 0
    val = False
    for r in runs:
        if r < 0 or pos + r > n:
            raise ArtifactError("run-length data inconsistent with n_max")
        if val:
            out[pos:pos + r] = True
        pos += r
        val = not val
    if pos != n:
        raise ArtifactError("run-length data inconsistent with n_max")
    return out


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True,
                      separators=(",", ":")).encode()


def artifact_payload(art: SubsetArtifact) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": art.kind,
        "n_max": art.n_max,
        "bits_rle": bits_to_rle(art.bits),
        "checkpoints": art.checkpoints,
        "guarantee": art.guarantee,
        "diagnostics": art.diagnostics,
        "meta": art.meta,
    }


def save_artifact(art: SubsetArtifact, path) -> None:
    payload = artifact_payload(art)
    payload["integrity_sha256"] = hashlib.sha256(
        _canonical(payload)).hexdigest()
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_artifact(path) -> SubsetArtifact:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"unreadable artifact: {exc}") from exc
    digest = payload.pop("integrity_sha256", None)
    if digest is None:
        raise ArtifactError("artifact missing integrity digest")
    if hashlib.sha256(_canonical(payload)).hexdigest() != digest:
        raise ArtifactError("integrity digest mismatch")
    if payload.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(
            f"unsupported format version {payload.get('format_version')}")
    bits = rle_to_bits(payload["bits_rle"], payload["n_max"])
    return SubsetArtifact(payload["kind"], bits,
                          checkpoints=payload["checkpoints"],
                          guarantee=payload["guarantee"],
                          diagnostics=payload["diagnostics"],
                          meta=payload["meta"])


# -- semantic re-verification -------------------------------------------------

def verify_artifact(art: SubsetArtifact) -> dict:
    """Recompute every certified inequality from the artifact's own bitset
    and stored numbers.  Returns {'ok': bool, 'failures': [...]} with one
    entry per violated record."""
    form = art.guarantee.get("form", "")
    fn = _VERIFIERS.get(form)
    if fn is None:
        return {"ok": False, "failures": [f"unknown guarantee form {form!r}"]}
    failures = fn(art)
    return {"ok": not failures, "failures": failures}


def _verify_checkpoint_ratio(art):
    counts = art.counts()
    num = art.guarantee["q_num"]
    den = art.guarantee["q_den"]
    failures = []
    for cp in art.checkpoints:
        s = cp["s"]
        if int(counts[s]) != cp["count"]:
            failures.append(f"checkpoint s={s}: stored count {cp['count']} "
                            f"!= bitset count {int(counts[s])}")
        if s > 0 and int(counts[s]) * den < num * s:
            failures.append(f"checkpoint s={s}: density below target")
    return failures


def _verify_tracking_ratio(art):
    counts = art.counts()
    failures = []
    for cp in art.checkpoints:
        s = cp["s"]
        if int(counts[s]) != cp["count"]:
            failures.append(f"checkpoint s={s}: count mismatch")
            continue
        if s == 0:
            continue
        thr = (Fraction(cp["target_num"], cp["target_den"])
               - Fraction(1, 2 ** cp["slack_pow"]))
        if thr > 0 and (int(counts[s]) * thr.denominator
                        < thr.numerator * s):
            failures.append(f"checkpoint s={s}: density below slacked target")
    return failures


def _verify_lookahead(art):
    counts = art.counts()
    g = art.guarantee
    num, den, n0 = g["q_num"], g["q_den"], g["n0"]
    failures = []
    for n in range(n0, art.n_max + 1):
        need = ceil_div(num * n, den) - ceil_sqrt(n)
        if int(counts[n]) < need:
            failures.append(f"n={n}: count {int(counts[n])} below "
                            f"ceil(qn) − ceil_sqrt(n) = {need}")
            if len(failures) > 4:
                break
    return failures


def _verify_witness_margin(art):
    counts = art.counts()
    h = art.guarantee["h_of_n"]
    failures = []
    for n in range(1, art.n_max + 1):
        p = 1 << h[n - 1]
        need = ceil_div(n * (p - 1), p) - ceil_sqrt(n)
        if int(counts[n]) < need:
            failures.append(f"n={n}: count below witnessed margin {need}")
            if len(failures) > 4:
                break
    return failures


def _verify_relative(art):
    # the relative margin needs the source stream; the artifact alone can
    # only re-check its recorded verdict flag
    if art.guarantee.get("holds") is True:
        return []
    return ["recorded guarantee verdict is not 'holds'"]


def _verify_target_approach(art):
    counts = art.counts()
    failures = []
    prev = None
    for cp in art.checkpoints:
        n, s = cp["n"], cp["s"]
        num, den = cp["q_num"], cp["q_den"]
        c = int(counts[s])
        if c != cp["count"]:
            failures.append(f"checkpoint n={n}: count mismatch at s={s}")
        if abs(c * den - num * s) * (n + 1) > s * den:
            failures.append(f"checkpoint n={n}: approach bound violated")
        if prev is not None:
            lo = min(Fraction(prev[1], prev[0]), Fraction(c, s))
            hi = max(Fraction(prev[1], prev[0]), Fraction(c, s))
            for k in range(prev[0] + 1, s):
                r = Fraction(int(counts[k]), k)
                if not lo <= r <= hi:
                    failures.append(f"betweenness fails at k={k}")
                    break
        prev = (s, c)
    return failures


def _verify_blockwise_levels(art):
    counts = art.counts()
    levels = art.guarantee["levels"]  # list of [n, L]
    failures = []
    fact = [1]
    top = max(n for n, _ in levels)
    for i in range(1, top + 2):
        fact.append(fact[-1] * i)
    for n, L in levels:
        lo, hi = fact[n], fact[n + 1]
        blk = int(counts[hi] - counts[lo])
        if blk * n != L * (hi - lo):
            failures.append(f"block {n}: density != {L}/{n}")
        rho_hi = Fraction(int(counts[hi]), hi)
        hval = Fraction(L, n)
        d = rho_hi - hval
        if not (-hval / (n + 1) <= d <= (1 - hval) / (n + 1)):
            failures.append(f"block {n}: endpoint sandwich violated")
    return failures


def _verify_ratio_intervals(art):
    counts = art.counts()
    failures = []
    for iv in art.checkpoints:
        a, b, c, e = iv["a"], iv["b"], iv["c"], iv["e"]
        blk = int(counts[c + 1] - counts[a])
        if blk != iv["block_count"]:
            failures.append(f"interval [{a},{c}]: block count mismatch")
        if iv["state"] == "completed" and blk != c - a + 1:
            failures.append(f"interval [{a},{c}]: marked completed but "
                            "not fully enumerated")
        if iv.get("gap_avoided") and iv.get("identity_exact") is False:
            failures.append(f"interval [{a},{c}]: exact ratio identity "
                            "recorded violated")
        if iv["state"] == "finalized":
            w = iv["witness"]
            if art.bits[w]:
                failures.append(f"witness {w} was enumerated")
        # block density floor 1 − 2^-e (waiting/finalized keep >= |J|/|I|)
        size = c - a + 1
        if blk * (1 << e) < size * ((1 << e) - 1):
            failures.append(f"interval [{a},{c}]: density floor violated")
    return failures


def _verify_restraint(art):
    counts = art.counts()
    failures = []
    for rec in art.checkpoints:
        if rec.get("final_interval") is None:
            continue
        k = rec["k"]
        m = rec["final_interval"][1]
        lhs = int(counts[m]) * (1 << (k + 2))
        rhs = ((1 << (k + 2)) - 1) * m
        if not lhs < rhs:
            failures.append(f"requirement {k}: rho_m(A) not strictly below "
                            f"1 − 2^-{k + 2}")
    return failures


def _verify_log_sparse(art):
    counts = art.counts()
    failures = []
    for n in range(1, art.n_max + 1):
        if int(counts[n]) > n.bit_length():  # floor(log2 n) + 1
            failures.append(f"n={n}: sparsity bound violated")
            break
    return failures


def write_certified_csv(art: SubsetArtifact, path) -> None:
    """One row per certified inequality: the count at n together with the
    certified rational lower and/or upper bound on it.

    Checkpoint-style guarantees yield one row per checkpoint length;
    margin-style guarantees one row per window n.  Upper bounds from the
    restraint form are strict; all others are non-strict.  Forms whose
    guarantee cannot be expressed as per-n count bounds (relative margins,
    interval reports, bare membership) emit only the header.
    """
    counts = art.counts()
    g = art.guarantee
    form = g.get("form", "")
    rows = []

    def row(n, lower=None, upper=None, strict_upper=False):
        c = int(counts[n])
        ok = True
        if lower is not None:
            ok = ok and c * lower.denominator >= lower.numerator
        if upper is not None:
            lhs = c * upper.denominator
            ok = ok and (lhs < upper.numerator if strict_upper
                         else lhs <= upper.numerator)
        rows.append([n, c,
                     lower.numerator if lower is not None else "",
                     lower.denominator if lower is not None else "",
                     upper.numerator if upper is not None else "",
                     upper.denominator if upper is not None else "",
                     int(ok)])

    if form == "checkpoint-ratio":
        q = Fraction(g["q_num"], g["q_den"])
        for cp in art.checkpoints:
            if cp["s"] > 0:
                row(cp["s"], lower=q * cp["s"])
    elif form == "tracking-checkpoint-ratio":
        for cp in art.checkpoints:
            if cp["s"] == 0:
                continue
            thr = (Fraction(cp["target_num"], cp["target_den"])
                   - Fraction(1, 2 ** cp["slack_pow"]))
            row(cp["s"], lower=max(thr, Fraction(0)) * cp["s"])
    elif form == "lookahead-margin":
        q = Fraction(g["q_num"], g["q_den"])
        for n in range(g["n0"], art.n_max + 1):
            row(n, lower=Fraction(
                ceil_div(q.numerator * n, q.denominator) - ceil_sqrt(n)))
    elif form == "witness-margin":
        h = g["h_of_n"]
        for n in range(1, art.n_max + 1):
            p = 1 << h[n - 1]
            row(n, lower=Fraction(ceil_div(n * (p - 1), p) - ceil_sqrt(n)))
    elif form == "target-approach":
        for cp in art.checkpoints:
            n, s = cp["n"], cp["s"]
            q = Fraction(cp["q_num"], cp["q_den"])
            slack = Fraction(s, n + 1)
            row(s, lower=q * s - slack, upper=q * s + slack)
    elif form == "blockwise-levels":
        fact = [1]
        top = max((n for n, _ in g["levels"]), default=0)
        for i in range(1, top + 2):
            fact.append(fact[-1] * i)
        for n, L in g["levels"]:
            hi = fact[n + 1]
            h = Fraction(L, n)
            row(hi, lower=(h - h / (n + 1)) * hi,
                upper=(h + (1 - h) / (n + 1)) * hi)
    elif form == "restraint-report":
        for rec in art.checkpoints:
            if rec.get("final_interval") is None:
                continue
            m = rec["final_interval"][1]
            k = rec["k"]
            row(m, upper=(1 - Fraction(1, 1 << (k + 2))) * m,
                strict_upper=True)
    elif form == "log-sparse":
        for n in range(1, art.n_max + 1):
            row(n, upper=Fraction(n.bit_length()))

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "count", "lower_num", "lower_den",
                    "upper_num", "upper_den", "holds"])
        w.writerows(rows)


_VERIFIERS = {
    "checkpoint-ratio": _verify_checkpoint_ratio,
    "tracking-checkpoint-ratio": _verify_tracking_ratio,
    "lookahead-margin": _verify_lookahead,
    "witness-margin": _verify_witness_margin,
    "lookahead-margin-relative": _verify_relative,
    "target-approach": _verify_target_approach,
    "blockwise-levels": _verify_blockwise_levels,
    "ratio-interval-report": _verify_ratio_intervals,
    "restraint-report": _verify_restraint,
    "log-sparse": _verify_log_sparse,
    "membership-only": lambda art: [],
}
