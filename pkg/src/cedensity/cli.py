"""Command-line entry point: config ingestion, construction dispatch, and
reproducible CSV/JSONL/artifact emission.

All machine behaviour is declared from a fixed vocabulary of rule kinds —
configs never carry executable code.  Outputs are byte-deterministic:
sorted JSON keys, LF-terminated CSV, no timestamps.
Exit codes: 0 success, 2 configuration, 3 budget, 4 artifact integrity.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import approximators, artifacts, builders, genericity, prioritysim
from .approximators import LimitApprox, SubsetArtifact
from .core import (CEStream, SetOracle, density_profile, dyadic_class,
                   dyadic_union)
from .errors import (ArtifactError, BudgetExceeded, CedensityError,
                     ConfigError)
from .metrics import symdiff_profile


def _frac(v) -> Fraction:
    try:
        return Fraction(v)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad rational {v!r}") from exc


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    uni = cfg.get("universe", {})
    if not (isinstance(uni.get("n_max"), int) and uni["n_max"] >= 1):
        raise ConfigError("universe.n_max must be a positive integer")
    if not (isinstance(uni.get("stage_max"), int) and uni["stage_max"] >= 1):
        raise ConfigError("universe.stage_max must be a positive integer")
    return cfg


def _build_set(spec: dict) -> SetOracle:
    kind = spec.get("kind")
    label = spec.get("label", kind)
    if kind == "empty":
        return SetOracle.empty(label)
    if kind == "naturals":
        return SetOracle.naturals(label)
    if kind == "explicit":
        return SetOracle.explicit(spec["elements"], label)
    if kind == "residue-union":
        return SetOracle.residue_union(spec["modulus"], spec["residues"],
                                       label)
    if kind == "dyadic-class":
        return dyadic_class(spec["k"], label)
    if kind == "dyadic-union":
        return dyadic_union(spec["indices"],
                            include_zero=spec.get("include_zero", False),
                            label=label)
    raise ConfigError(f"unknown set kind {kind!r}")


def _sets(cfg) -> dict:
    out = {}
    for spec in cfg.get("sets", []):
        if "label" not in spec:
            raise ConfigError("every set needs a label")
        out[spec["label"]] = _build_set(spec)
    return out


def _stage_fn(schedule: dict):
    kind = schedule.get("kind", "own-stage")
    if kind == "immediate":
        return lambda m: 0
    if kind == "own-stage":
        return lambda m: m
    if kind == "successor":
        return lambda m: m + 1
    if kind == "delayed":
        f = schedule.get("factor", 1)
        off = schedule.get("offset", 0)
        return lambda m: f * m + off
    if kind == "burst":
        p = schedule["period"]
        return lambda m: ((m // p) + 1) * p
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _streams(cfg, sets) -> dict:
    n_max = cfg["universe"]["n_max"]
    stage_max = cfg["universe"]["stage_max"]
    out = {}
    for spec in cfg.get("streams", []):
        label = spec.get("label")
        if label is None:
            raise ConfigError("every stream needs a label")
        if spec.get("schedule", {}).get("kind") == "scripted":
            out[label] = CEStream.from_schedule(
                spec["schedule"]["pairs"], n_max=n_max, stage_max=stage_max,
                label=label)
            continue
        base = sets.get(spec.get("set"))
        if base is None:
            raise ConfigError(f"stream {label}: unknown set {spec.get('set')!r}")
        out[label] = CEStream.from_oracle(
            base, n_max=n_max, stage_max=stage_max,
            delay_fn=_stage_fn(spec.get("schedule", {})), label=label)
    return out


def _deciders(cfg) -> dict:
    P = prioritysim.PartialDecider
    out = {}
    for spec in cfg.get("deciders", []):
        label = spec.get("label")
        kind = spec.get("kind")
        delay = spec.get("delay", 0)
        if kind == "constant":
            out[label] = P.constant(spec["value"], delay, label)
        elif kind == "parity":
            out[label] = P.parity(delay, label)
        elif kind == "residue":
            out[label] = P.residue(spec["modulus"], spec["residues"], delay,
                                   label)
        elif kind == "never":
            out[label] = P.never(label)
        elif kind == "value-delay":
            v = spec["value"]
            f = spec.get("delay_factor", 1)
            out[label] = P.delayed_rule(lambda n, v=v: v,
                                        lambda n, f=f: f * n, label)
        else:
            raise ConfigError(f"unknown decider kind {kind!r}")
    return out


def _jump(spec: dict) -> prioritysim.JumpApprox:
    kind = spec.get("kind")
    if kind == "never":
        return prioritysim.JumpApprox(lambda i, s: 0, lambda i, s: None)
    if kind == "step":
        on_at, use = spec["on_at"], spec["use"]
        return prioritysim.JumpApprox(
            lambda i, s: 1 if s >= on_at else 0,
            lambda i, s: use if s >= on_at else None)
    if kind == "blink":
        p, use = spec["period"], spec["use"]
        return prioritysim.JumpApprox(
            lambda i, s: (s // p) % 2, lambda i, s: use)
    raise ConfigError(f"unknown jump kind {kind!r}")


def _targets(values):
    return [_frac(v) for v in values]


class _ListTrace:
    """JSONL adapter for builders whose trace is a plain list of records."""

    def __init__(self, rows):
        self.rows = rows

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for r in self.rows:
                fh.write(json.dumps(r, sort_keys=True) + "\n")


def _approx(spec: dict, sets, n_max: int) -> builders.Delta2Approx:
    kind = spec.get("kind")
    window = spec.get("window", n_max)
    if kind == "constant":
        bits = sets[spec["set"]].membership_array(window)
        return builders.Delta2Approx.constant(bits, label=spec["set"])
    if kind == "flip":
        before = sets[spec["before"]].membership_array(window)
        after = sets[spec["after"]].membership_array(window)
        at = spec["at"]
        return builders.Delta2Approx(
            lambda s: after if s >= at else before, window, label="flip")
    raise ConfigError(f"unknown approximation kind {kind!r}")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


# -- subcommands --------------------------------------------------------------

def cmd_density(cfg, outdir):
    n_max = cfg["universe"]["n_max"]
    sets = _sets(cfg)
    summary = {}
    for label, oracle in sorted(sets.items()):
        prof = density_profile(oracle, n_max)
        prof.write_csv(os.path.join(outdir, f"density_{label}.csv"))
        lo, hi = prof.window_bounds(1, n_max)
        summary[label] = {"window": [1, n_max],
                          "min": [lo.numerator, lo.denominator],
                          "max": [hi.numerator, hi.denominator]}
    _write_json(os.path.join(outdir, "density_summary.json"), summary)
    return 0


def cmd_metrics(cfg, outdir):
    sets = _sets(cfg)
    spec = cfg.get("metrics")
    if not spec:
        raise ConfigError("config has no 'metrics' section")
    try:
        a, b = sets[spec["a"]], sets[spec["b"]]
    except KeyError as exc:
        raise ConfigError(f"metrics references unknown set {exc}") from exc
    hi = spec.get("hi", cfg["universe"]["n_max"])
    lo = spec.get("lo", 1)
    prof = symdiff_profile(a, b, hi)
    prof.write_csv(os.path.join(outdir, "metrics_profile.csv"))
    dmin, dmax = prof.sym.window_bounds(lo, hi)
    _write_json(os.path.join(outdir, "metrics_summary.json"), {
        "window": [lo, hi],
        "sym_min": [dmin.numerator, dmin.denominator],
        "sym_max": [dmax.numerator, dmax.denominator],
        "b_subset_of_a": prof.b_subset_of_a,
    })
    return 0


def _dispatch_construct(cfg, sets, streams, deciders):
    """Returns (artifact, trace_or_None)."""
    spec = cfg.get("construction")
    if not spec:
        raise ConfigError("config has no 'construction' section")
    op = spec.get("op")
    n_max = cfg["universe"]["n_max"]
    stage_max = cfg["universe"]["stage_max"]

    def stream(key="stream"):
        try:
            return streams[spec[key]]
        except KeyError as exc:
            raise ConfigError(f"unknown stream {exc}") from exc

    def stream_list(key="streams"):
        try:
            return [streams[x] for x in spec[key]]
        except KeyError as exc:
            raise ConfigError(f"unknown stream {exc}") from exc

    def decider_list(key="deciders"):
        try:
            return [deciders[x] for x in spec[key]]
        except KeyError as exc:
            raise ConfigError(f"unknown decider {exc}") from exc

    if op == "checkpoint-subset":
        return approximators.checkpoint_subset(stream(), _frac(spec["q"])), None
    if op == "tracking-checkpoint-subset":
        return approximators.tracking_checkpoint_subset(
            stream(), _targets(spec["targets"])), None
    if op == "lookahead-subset":
        return approximators.lookahead_subset(
            stream(), _frac(spec["q"]), spec.get("n0", 1)), None
    if op == "witnessed-subset":
        w = spec.get("witness", {})
        if w.get("kind") == "constant":
            wfn = lambda k: w.get("value", 0)
        elif w.get("kind") == "exponential":
            base, shift = w.get("base", 2), w.get("shift", 1)
            wfn = lambda k: base ** (k + shift)
        else:
            raise ConfigError(f"unknown witness kind {w.get('kind')!r}")
        return approximators.witnessed_subset(stream(), wfn), None
    if op == "target-oscillation":
        return builders.infsup_build(_targets(spec["targets"]),
                                     spec["n_checkpoints"], n_max), None
    if op == "density-transfer":
        try:
            B = _approx(spec["approx"], sets, n_max)
        except KeyError as exc:
            raise ConfigError(f"unknown set {exc}") from exc
        st, t, rows, report = builders.density_transfer_build(
            B, spec["n_checkpoints"], stage_max, n_max)
        art = _stream_artifact(st, "density_transfer",
                               {"form": "membership-only"})
        art.meta["t"] = {str(k): v for k, v in sorted(t.items())}
        art.meta["report"] = report
        if "diagnostics" in report:
            art.diagnostics = report.pop("diagnostics")
        return art, _ListTrace(rows)
    if op == "blockwise-levels":
        vals = {int(k): _frac(v) for k, v in spec["levels"].items()}
        g = builders.StableMonotoneG(
            lambda n, s: vals.get(n, Fraction(0)), label="const-levels")
        st, levels = builders.blockwise_limit_build(
            g, spec["n_blocks"], stage_max)
        return _stream_artifact(st, "blockwise_levels", {
            "form": "blockwise-levels",
            "levels": sorted([n, L] for n, L in levels.items())}), None
    if op == "limsup-blockwise":
        st, levels, _g = builders.limsup_density_build(
            _targets(spec["targets"]), spec["n_blocks"], stage_max)
        return _stream_artifact(st, "limsup_blockwise", {
            "form": "blockwise-levels",
            "levels": sorted([n, L] for n, L in levels.items())}), None
    if op == "blockwise-union":
        st = prioritysim.blockwise_union_build(stream_list(), n_max,
                                               stage_max)
        return _stream_artifact(st, "blockwise_union",
                                {"form": "membership-only"}), None
    if op == "prefix-gated":
        st, report = prioritysim.prefix_gated_build(stream_list(), n_max,
                                                    stage_max)
        art = _stream_artifact(st, "prefix_gated",
                               {"form": "membership-only"})
        art.meta["report"] = {str(k): v for k, v in report.items()}
        return art, None
    if op == "ratio-interval":
        st, intervals, trace = prioritysim.ratio_interval_build(
            decider_list(), n_max, stage_max)
        recs = [iv for e in sorted(trace.outcomes)
                for iv in [dict(v, e=e) for v in
                           trace.outcomes[e]["intervals"]]]
        art = _stream_artifact(st, "ratio_interval",
                               {"form": "ratio-interval-report"})
        art.checkpoints = recs
        return art, trace
    if op == "restraint-witness":
        st, trace = prioritysim.restraint_witness_build(stream_list(), n_max,
                                                        stage_max)
        art = _stream_artifact(st, "restraint_witness",
                               {"form": "restraint-report"})
        art.checkpoints = [dict(v, k=k) for k, v in
                           sorted(trace.outcomes.items())]
        return art, trace
    if op == "sparse-hitting":
        st, report = builders.sparse_hitting_build(stream_list(), n_max,
                                                   stage_max)
        art = _stream_artifact(st, "sparse_hitting", {"form": "log-sparse"})
        art.checkpoints = report
        return art, None
    if op == "permitted-interval":
        st, g_rows, trace = prioritysim.permitted_interval_build(
            stream("permitter"), _jump(spec.get("jump", {})), stream_list(),
            n_max, stage_max,
            pairs=[tuple(p) for p in spec["pairs"]] if "pairs" in spec
            else None)
        art = _stream_artifact(st, "permitted_interval",
                               {"form": "membership-only"})
        art.meta["g_rows"] = {str(p): rows for p, rows in g_rows.items()}
        return art, trace
    if op == "split-interval":
        a0, a1, trace = prioritysim.split_interval_build(
            stream("permitter"), decider_list(), n_max, stage_max)
        art = _stream_artifact(a0, "split_interval_a0",
                               {"form": "membership-only"})
        art.meta["a1_rle"] = artifacts.bits_to_rle(a1.final_members())
        return art, trace
    raise ConfigError(f"unknown construction op {op!r}")


def _stream_artifact(st: CEStream, kind: str, guarantee: dict):
    return SubsetArtifact(kind, st.final_members(), guarantee=guarantee,
                          meta={"stream": st.label})


def cmd_construct(cfg, outdir):
    sets = _sets(cfg)
    streams = _streams(cfg, sets)
    deciders = _deciders(cfg)
    art, trace = _dispatch_construct(cfg, sets, streams, deciders)
    apath = os.path.join(outdir, "artifact.json")
    artifacts.save_artifact(art, apath)
    if trace is not None:
        trace.write_jsonl(os.path.join(outdir, "trace.jsonl"))
    # independent re-verification pass, from the file just written
    reloaded = artifacts.load_artifact(apath)
    artifacts.write_certified_csv(reloaded, os.path.join(outdir,
                                                         "certified.csv"))
    report = artifacts.verify_artifact(reloaded)
    _write_json(os.path.join(outdir, "verify.json"), report)
    if not report["ok"]:
        print("verification failed:", report["failures"][:3],
              file=sys.stderr)
        return 4
    return 0


def cmd_check(artifact_path):
    try:
        art = artifacts.load_artifact(artifact_path)
    except ArtifactError as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return 4
    report = artifacts.verify_artifact(art)
    if report["ok"]:
        print(f"PASS: {art.kind} ({art.n_max} elements, "
              f"{len(art.checkpoints)} records)")
        return 0
    print("FAIL:", "; ".join(report["failures"][:5]), file=sys.stderr)
    return 4


def cmd_generic(cfg, outdir):
    sets = _sets(cfg)
    deciders = _deciders(cfg)
    spec = cfg.get("generic")
    if not spec:
        raise ConfigError("config has no 'generic' section")
    try:
        dec = deciders[spec["decider"]]
        target = sets[spec["set"]]
    except KeyError as exc:
        raise ConfigError(f"generic references unknown label {exc}") from exc
    n_max = cfg["universe"]["n_max"]
    report = genericity.at_density_report(
        dec, target, _frac(spec.get("r", "0")), n_max,
        lo=spec.get("lo", 1), stage_budget=cfg["universe"]["stage_max"])
    rep = genericity.evaluate_partial(dec, target, n_max,
                                      cfg["universe"]["stage_max"])
    rep.domain.write_csv(os.path.join(outdir, "generic_domain.csv"))
    alpha = report.pop("alpha_estimate")
    report["alpha_estimate"] = [alpha.numerator, alpha.denominator]
    _write_json(os.path.join(outdir, "generic_summary.json"), report)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="cedensity",
        description="exact density profiles and effective constructions")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("density", "construct", "generic", "metrics"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
    pc = sub.add_parser("check")
    pc.add_argument("--artifact", required=True)
    args = ap.parse_args(argv)

    try:
        if args.command == "check":
            return cmd_check(args.artifact)
        cfg = _load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        fn = {"density": cmd_density, "construct": cmd_construct,
              "generic": cmd_generic, "metrics": cmd_metrics}[args.command]
        return fn(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return 3
    except ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return 4
    except CedensityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
