"""Command-line entry point: ``specgap <command> ...``.

CSV output carries ``#``-prefixed header comments; JSON reports carry a
``schema`` version. Exit status is 0 iff every checked assertion passed.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import assembly, history_state, marker, path_laplacian, qpe_sim, tm_model
from .core import DEFAULT_BUDGET_DIM

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    machine: str | None = None
    eta: str = "1"
    beta: Fraction = Fraction(1)
    falloff: str = "unary"
    n_range: tuple[int, int] = (2, 8)
    out: str | None = None
    seed: int = 1234
    budget_dim: int = DEFAULT_BUDGET_DIM

    def __post_init__(self):
        if self.n_range[0] > self.n_range[1]:
            raise ValueError(f"empty N range {self.n_range}")
        if self.machine and not self.machine.startswith("consume_") and self.machine not in tm_model.MACHINES:
            if not Path(self.machine).exists():
                raise ValueError(f"machine file {self.machine} does not exist")

    @property
    def ns(self) -> range:
        return range(self.n_range[0], self.n_range[1] + 1)


class UsageError(ValueError):
    pass


def parse_range(text: str) -> tuple[int, int]:
    """``"7"`` or ``"2..16"``."""
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
    else:
        lo = hi = int(text)
    if lo > hi:
        raise UsageError(f"empty range {text!r}")
    return lo, hi


# --- output -------------------------------------------------------------------------

def _write_atomic(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, p)


def emit_csv(rows: list[dict], columns: list[str], header: list[str], out: str | None):
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in columns})
    _write_atomic(out, buf.getvalue())


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Fraction):
        return str(v)
    return "" if v is None else v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def emit_json(report: dict, out: str | None):
    _write_atomic(out, json.dumps(_jsonable({"schema": SCHEMA_VERSION, **report}), indent=2) + "\n")


# --- lemma suites -------------------------------------------------------------------

def suite_elastic_1(args) -> dict:
    w_max = args.w_max or 14
    rows = []
    for w in range(2, w_max + 1):
        iv = path_laplacian.bracket_min_eigenvalue(w)
        lo, hi = path_laplacian.interval_bounds(w)
        neg = path_laplacian.count_negative_eigenvalues(w)
        rows.append({"w": w, "lower": str(iv.lower), "upper": str(iv.upper),
                     "inside": bool(lo < iv.lower and iv.upper < hi), "negative_count": neg})
    cont = [w for w in range(1, 21)
            if path_laplacian.charpoly_eval(w, Fraction(-1, 2)) != Fraction((-1) ** (1 + w), 2**w)]
    ok = all(r["inside"] and r["negative_count"] == 1 for r in rows) and not cont
    return {"rows": rows, "continuant_failures": cont, "ok": ok}


def _block_suite(N: int, falloff) -> dict:
    res = marker.check_block_theorem(N, falloff)
    rows = [{"signature": r.signature, "class": r.cls, "lambda_min": r.lam_min,
             "predicted_lower": r.predicted_lower, "predicted_upper": r.predicted_upper,
             "gap": r.gap, **r.extra} for r in res["rows"]]
    return {"N": N, "rows": rows, "failures": res["failures"], "ok": res["ok"]}


def suite_elastic(args) -> dict:
    return _block_suite(_n(args, 8), _falloff(args))


def suite_elastic_bang(args) -> dict:
    lin = marker.FalloffSpec("linear", zeta=2)
    N = min(_n(args, 5), 6)
    rep = _block_suite(N, lin)
    rep["falloff"] = "linear, zeta=2"
    return rep


def suite_phase_signal(args) -> dict:
    max_eta = args.max_eta or 5
    rows, readout_fail = [], []
    for L in range(1, max_eta + 1):
        for eta in map("".join, itertools.product("01", repeat=L)):
            enc = qpe_sim.encode_phase(eta)
            for N in range(2, 13, 2):
                r = qpe_sim.phase_signal_report(enc, N)
                rows.append(r)
                if r["full_expansion"]:
                    st = qpe_sim.run_inverse_qft(qpe_sim.run_controlled_phase_stage(enc, N), enc)
                    p = qpe_sim.readout_distribution(st).get(qpe_sim.expected_readout(enc, N), 0.0)
                    if p < 1 - 1e-10:
                        readout_fail.append((eta, N, p))
    claim1 = all(r["overlap"] <= 1e-12 for r in rows if r["full_expansion"])
    failures = [{k: r[k] for k in ("eta", "N", "overlap", "bound")} for r in rows if not r["satisfied"]]
    return {"cases": len(rows), "claim1_ok": claim1, "readout_failures": readout_fail,
            "failures": failures, "ok": not failures and not readout_fail}


def _toy_models():
    halting = history_state.SegmentModel(tm_model.consume_k(6), enc=qpe_sim.encode_phase("1"))
    never = history_state.SegmentModel(tm_model.never_halt(), mu=Fraction(1, 4))
    return halting, never


def suite_single_segment(args) -> dict:
    halting, never = _toy_models()
    wh = history_state.w_halt(halting)
    prof = {w: history_state.segment_energy(halting, w).lambda_min for w in range(2, 2 * wh + 1)}
    sign_ok = all((e > 0) if w < wh else (e < 0) for w, e in prof.items())
    argmin_ok = min(prof, key=prof.get) == wh
    nev = [history_state.segment_energy(never, w).lambda_min for w in range(2, 13)]
    never_ok = all(e > 0 for e in nev) and all(a > b for a, b in zip(nev, nev[1:]))
    return {"w_halt": wh, "halting_profile": prof, "never_profile": nev, "sign_ok": sign_ok,
            "argmin_ok": argmin_ok, "never_ok": never_ok, "ok": sign_ok and argmin_ok and never_ok}


def suite_multiple_segments(args) -> dict:
    N_max = _n(args, 8)
    model = history_state.SegmentModel(tm_model.consume_k(2), mu=Fraction(1, 4))
    rows = []
    for N in range(2, N_max + 1):
        dp = history_state.chain_ground_energy(model, N).lambda_min
        spec = marker.build_marker(N, marker.UNARY)
        brute = min(history_state.full_block_energy(model, (1,) + s + (1,), spec)
                    for s in itertools.product((0, 1), repeat=N - 2))
        rows.append({"N": N, "dp": dp, "full_block": brute, "ok": abs(dp - brute) <= 1e-10})
    return {"rows": rows, "ok": all(r["ok"] for r in rows)}


def tm_ham_report(N_max: int = 18) -> dict:
    never = history_state.SegmentModel(tm_model.never_halt(), enc=qpe_sim.encode_phase("1"))
    halting = history_state.SegmentModel(tm_model.consume_k(4), mu=Fraction(1, 16))
    wh = history_state.w_halt(halting)
    b = abs(history_state.segment_energy(halting, 2 * wh).lambda_min)
    rows = []
    for N in range(2, N_max + 1):
        e_never = history_state.chain_ground_energy(never, N).lambda_min
        e_halt = history_state.chain_ground_energy(halting, N).lambda_min
        row = {"N": N, "never": e_never, "halting": e_halt, "never_ok": e_never >= -1e-10}
        if N >= wh + 1:
            row["bound"] = -(N // wh) * b
            row["halting_ok"] = e_halt <= row["bound"]
        rows.append(row)
    ok = all(r["never_ok"] and r.get("halting_ok", True) for r in rows)
    return {"w_halt": wh, "b": b, "rows": rows, "ok": ok}


def suite_tm_ham(args) -> dict:
    return tm_ham_report(_n(args, 18))


def suite_undecidability(args) -> dict:
    beta = Fraction(args.beta) if args.beta else Fraction(1)
    rows = []
    for halting in (False, True):
        for N in range(2, min(_n(args, 4), 4) + 1):
            r = assembly.check_total_spectrum(assembly.AssemblyConfig(beta=beta, halting=halting, mu=Fraction(1)), N)
            rows.append({"halting": halting, **r})
    return {"rows": rows, "ok": all(r["ok"] for r in rows)}


def suite_main_periodic(args) -> dict:
    rows = [{"P": P, "N": N, "min_breaks": assembly.tiling_penalty_minimum(N, P)}
            for P, N in ((2, 3), (3, 4), (3, 5))]
    try:
        assembly.build_periodic_variant(assembly.AssemblyConfig(), 4, 2)
        gcd_ok = False
    except assembly.PreconditionError:
        gcd_ok = True
    return {"rows": rows, "gcd_enforced": gcd_ok,
            "ok": gcd_ok and all(r["min_breaks"] == 1 for r in rows)}


LEMMAS = {
    "elastic-1": suite_elastic_1,
    "elastic": suite_elastic,
    "elastic!": suite_elastic_bang,
    "phase-signal": suite_phase_signal,
    "single-segment": suite_single_segment,
    "multiple-segments": suite_multiple_segments,
    "TM-ham": suite_tm_ham,
    "undecidability-1-gap": suite_undecidability,
    "main-periodic": suite_main_periodic,
}


# --- commands -------------------------------------------------------------------------

def _falloff(args) -> marker.FalloffSpec:
    if getattr(args, "falloff", "unary") == "adaptive":
        return marker.FalloffSpec("adaptive", machine=_machine(args))
    return marker.UNARY


def _n(args, default: int) -> int:
    if args.N is None:
        return default
    lo, hi = parse_range(args.N)
    return hi


def _machine(args) -> tm_model.TMDefinition:
    return tm_model.get_machine(args.machine or "sweeper")


def cmd_laplacian(args) -> int:
    lo, hi = parse_range(args.w or "2..14")
    rows = []
    for w in range(lo, hi + 1):
        iv = path_laplacian.bracket_min_eigenvalue(w)
        rows.append({"w": w, "lower": iv.lower, "upper": iv.upper,
                     "lambda_min_float": path_laplacian.min_eigenvalue_float(w)})
    emit_csv(rows, ["w", "lower", "upper", "lambda_min_float"],
             ["certified bracket of the least eigenvalue of the perturbed path Laplacian",
              "lower/upper: exact rationals; lambda_min_float: dense cross-check"], args.out)
    return 0


def cmd_marker(args) -> int:
    N = _n(args, 6)
    res = marker.check_block_theorem(N, _falloff(args)) if args.max_blocks is None else None
    rows = marker.marker_block_table(N, _falloff(args), args.max_blocks)
    emit_csv([{"signature": r.signature, "class": r.cls, "lambda_min": r.lam_min,
               "predicted_lower": r.predicted_lower, "predicted_upper": r.predicted_upper, "gap": r.gap}
              for r in rows],
             ["signature", "class", "lambda_min", "predicted_lower", "predicted_upper", "gap"],
             [f"shifted marker blocks, N={N}, falloff={args.falloff}"], args.out)
    return 0 if res is None or res["ok"] else 1


def cmd_qpe(args) -> int:
    enc = qpe_sim.encode_phase(args.eta)
    r = qpe_sim.phase_signal_report(enc, _n(args, 2))
    emit_json({"phi_bits": r["phi_bits"], "overlap": r["overlap"], "bound": r["bound"],
               "satisfied": r["satisfied"], "N": r["N"], "eta": args.eta}, args.out)
    return 0 if r["satisfied"] else 1


def _segment_model(args) -> history_state.SegmentModel:
    enc = qpe_sim.encode_phase(args.eta) if args.eta else None
    tm = _machine(args)
    return history_state.SegmentModel(tm, tape=args.tape or "", enc=enc, falloff=_falloff(args))


def cmd_segment(args) -> int:
    model = _segment_model(args)
    lo, hi = parse_range(args.w or "2..16")
    rows = []
    for w in range(max(lo, 2), hi + 1):
        s = history_state.segment_energy(model, w)
        rows.append({"w": w, "class": s.classification, "bonus_log2": s.bonus_log2,
                     "penalty_lower": s.history_energy, "lambda_min": s.lambda_min})
    emit_csv(rows, ["w", "class", "bonus_log2", "penalty_lower", "lambda_min"],
             [f"single-segment energy, machine={model.tm.name}, eta={args.eta}, tape={args.tape!r}",
              "w counts both boundary sites; bonus_log2 = -f(w-2); penalty_lower = history-part energy"],
             args.out)
    return 0


def _assembly_config(args) -> assembly.AssemblyConfig:
    text = Path(args.config).read_text() if args.config else ""
    obj = json.loads(text) if text.strip() else {}
    if args.beta:
        obj["beta"] = args.beta
    if args.eta:
        obj["eta"] = args.eta
    return assembly.AssemblyConfig.from_json(obj)


def cmd_gap(args) -> int:
    cfg = _assembly_config(args)
    lo, hi = parse_range(args.N or "3..8")
    rows = []
    for N in range(lo, hi + 1):
        r = assembly.total_spectrum_model(cfg, N)
        rows.append({k: r[k] for k in ("N", "lambda0", "lambda1", "gap", "count_below_half")})
    emit_csv(rows, ["N", "lambda0", "lambda1", "gap", "count_below_half"],
             [f"sector-resolved low spectrum of H_tot, halting={cfg.halting}, beta={cfg.beta}, mu={cfg.mu_value}"],
             args.out)
    return 0


def cmd_verify(args) -> int:
    report = LEMMAS[args.lemma](args)
    emit_json({"lemma": args.lemma, **report}, args.out)
    return 0 if report["ok"] else 1


def cmd_figure(args) -> int:
    if args.name == "pen-and-bonux":
        halting, _ = _toy_models()
        rows = []
        for w in range(2, 17):
            s = history_state.segment_energy(halting, w)
            rows.append({"w": w, "class": s.classification, "bonus_log2": s.bonus_log2,
                         "penalty_lower": s.history_energy, "lambda_min": s.lambda_min})
        emit_csv(rows, ["w", "class", "bonus_log2", "penalty_lower", "lambda_min"],
                 ["single-segment energy of the halting toy (consume_6, eta=1)",
                  f"truncation ends at w = |phi|+5 = {halting.enc.phi_len + 5}; "
                  f"w_halt = {history_state.w_halt(halting)}"], args.out)
        return 0
    lo, hi = parse_range(args.N or "3..8")
    rows = []
    for N in range(lo, hi + 1):
        row = {"N": N}
        for tag, halting in (("nonhalting", False), ("halting", True)):
            r = assembly.total_spectrum_model(assembly.AssemblyConfig(halting=halting, mu=Fraction(1)), N)
            low = r["eigenvalues"][:6]
            row[f"{tag}_low"] = " ".join(f"{x:.6f}" for x in low)
            row[f"{tag}_count_below_half"] = r["count_below_half"]
        rows.append(row)
    emit_csv(rows, ["N", "nonhalting_low", "nonhalting_count_below_half", "halting_low", "halting_count_below_half"],
             ["six lowest eigenvalues of H_tot per N for the two toy computations"], args.out)
    return 0


def cmd_audit(args) -> int:
    rows = []
    for b in ([args.beta] if args.beta else ["1", "1/2", "1/8"]):
        cfg = assembly.AssemblyConfig(beta=Fraction(b), eta=args.eta or "1", normalize=True)
        rep = assembly.audit_interaction_form(assembly.build_total(cfg, _n(args, 3)))
        rows.append({"beta": b, "norms": rep.norms, "ok": rep.ok, "violations": rep.violations})
    emit_json({"rows": rows, "ok": all(r["ok"] for r in rows)}, args.out)
    return 0 if all(r["ok"] for r in rows) else 1


def cmd_build(args) -> int:
    N = _n(args, 4)
    if args.what == "marker":
        spec = marker.build_marker(N, _falloff(args))
    else:
        spec = assembly.build_total(assembly.AssemblyConfig(eta=args.eta or "1"), N)
    _write_atomic(args.out, spec.dumps() + "\n")
    return 0


# --- parser ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--N", help="chain length, or a range a..b for scans")
    p.add_argument("--eta")
    p.add_argument("--beta")
    p.add_argument("--machine")
    p.add_argument("--falloff", choices=["unary", "adaptive"], default="unary")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--budget-dim", type=int, default=DEFAULT_BUDGET_DIM)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="specgap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("laplacian", help="certified brackets for the perturbed path Laplacian")
    _common(p)
    p.add_argument("--w")
    p.set_defaults(func=cmd_laplacian)

    p = sub.add_parser("marker", help="per-signature marker block table")
    p.add_argument("action", choices=["verify"])
    _common(p)
    p.add_argument("--max-blocks", type=int)
    p.set_defaults(func=cmd_marker)

    p = sub.add_parser("qpe", help="truncation overlap of the phase register")
    p.add_argument("action", choices=["overlap"])
    _common(p)
    p.set_defaults(func=cmd_qpe)

    p = sub.add_parser("segment", help="single-segment energy profile")
    p.add_argument("action", choices=["profile"])
    _common(p)
    p.add_argument("--w")
    p.add_argument("--tape", default="")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("gap", help="low spectrum of the total Hamiltonian against N")
    p.add_argument("action", choices=["scan"])
    _common(p)
    p.add_argument("--config")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("verify", help="run one lemma's invariant suite")
    p.add_argument("lemma", choices=sorted(LEMMAS))
    _common(p)
    p.add_argument("--max-eta", type=int)
    p.add_argument("--w-max", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figure", help="CSV for a figure analogue")
    p.add_argument("name", choices=["pen-and-bonux", "gapped-vs-dense"])
    _common(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("audit", help="interaction-form audit of the assembled terms")
    _common(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("build", help="write a ChainSpec as JSON")
    p.add_argument("what", choices=["marker", "total"])
    _common(p)
    p.set_defaults(func=cmd_build)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        ap.error(str(e))


if __name__ == "__main__":
    sys.exit(main())
