"""Command-line entry point: ``fuzzwall <subcommand> ...``.

Exit status is 0 on success, 1 for usage, input or config errors and 2
when a simulation aborts on a broken run-time invariant.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from fuzzwall.config import ConfigError, default_config_path, load_config
from fuzzwall.fuzzy import FuzzyError, RuleBase, infer
from fuzzwall.metrics import APPS, METRICS, ComparisonReport, write_csv
from fuzzwall.netsim import SimulationError, run_comparison, run_named
from fuzzwall.rules import RuleSyntaxError, check_rules, default_rules_path, load_rules

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rules_path(arg: str | None) -> Path:
    if arg is None:
        return default_rules_path()
    p = Path(arg)
    # The bundled file may be named bare from any directory.
    if not p.exists() and p.name == default_rules_path().name and p.parent == Path("."):
        return default_rules_path()
    return p


def _load_rules(arg: str | None) -> RuleBase:
    path = _rules_path(arg)
    try:
        return load_rules(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None


def _seeds(text: str | None, declared: tuple[int, ...], fallback: int) -> list[int]:
    if text is None:
        return list(declared) or [fallback]
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds: expected a comma-separated list of integers, got {text!r}") from None
    if not seeds:
        raise UsageError("--seeds: empty list")
    if len(set(seeds)) != len(seeds):
        raise UsageError("--seeds: duplicate seeds")
    return seeds


def _num(x) -> str:
    return "-" if x is None else repr(float(x))


# --- subcommands -------------------------------------------------------


def cmd_infer(args) -> int:
    positional = list(args.values)
    rules_arg = args.rules
    if len(positional) == 3:
        if rules_arg is not None:
            raise UsageError("rules path given both positionally and with --rules")
        rules_arg = positional.pop(0)
    if len(positional) != 2:
        raise UsageError("infer expects [RULES] SOURCE DESTINATION")
    try:
        values = [float(v) for v in positional]
    except ValueError:
        raise UsageError(f"inputs must be numbers, got {positional}") from None
    rb = _load_rules(rules_arg)
    names = rb.input_names()
    if len(names) != 2:
        raise UsageError(f"rule base has {len(names)} inputs; infer takes exactly 2")
    raw = dict(zip(names, values))
    result = infer(rb, raw)
    notes = [
        f"{name} clamped from {raw[name]!r} to {used!r}"
        for name, used in result.inputs
        if used != raw[name]
    ]
    if args.json:
        doc = {
            "inputs": dict(result.inputs),
            "raw_inputs": raw,
            "crisp": result.crisp,
            "band": result.band.label,
            "fail_closed": result.fail_closed,
            "rules": [{"rule": str(r), "strength": w} for r, w in zip(rb.rules, result.firing_strengths)],
            "notes": notes,
        }
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    for note in notes:
        print(f"note: {note}")
    print(" ".join(f"{k}={v!r}" for k, v in result.inputs))
    print(f"security={result.crisp!r} band={result.band.label}" + (" (fail-closed)" if result.fail_closed else ""))
    for i, (rule, w) in enumerate(zip(rb.rules, result.firing_strengths), 1):
        print(f"  rule {i}: {rule}  strength={w!r}")
    return EXIT_OK


def surface(rb: RuleBase, n: int) -> list[tuple[float, float, float]]:
    if n < 2:
        raise UsageError(f"--grid-n must be >= 2, got {n}")
    a, b = rb.input_names()[:2]
    va, vb = rb.inputs[0], rb.inputs[1]
    xs = np.linspace(va.lo, va.hi, n).tolist()
    ys = np.linspace(vb.lo, vb.hi, n).tolist()
    return [(x, y, infer(rb, {a: x, b: y}).crisp) for x in xs for y in ys]


def cmd_surface(args) -> int:
    rb = _load_rules(args.rules_pos or args.rules)
    if len(rb.input_names()) != 2:
        raise UsageError("surface needs a rule base with exactly 2 inputs")
    rows = surface(rb, args.grid_n)
    a, b = rb.input_names()
    out_name = rb.output.name
    if args.json:
        text = json.dumps([{a: x, b: y, out_name: z} for x, y, z in rows], indent=2) + "\n"
    else:
        lines = [f"{a},{b},{out_name}"] + [f"{x!r},{y!r},{z!r}" for x, y, z in rows]
        text = "\n".join(lines) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"{args.out}: {exc.strerror or exc}") from None
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_rules_check(args) -> int:
    path = _rules_path(args.rules_pos or args.rules)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    diags = check_rules(text)
    errors = [d for d in diags if d.severity == "error"]
    if args.json:
        print(json.dumps({
            "path": str(path),
            "ok": not errors,
            "diagnostics": [
                {"severity": d.severity, "line": d.line, "column": d.column, "message": d.message} for d in diags
            ],
        }, indent=2))
    else:
        for d in diags:
            print(f"{path}:{d}", file=sys.stderr)
        if not errors:
            rb = load_rules(path)
            print(f"{path}: ok ({len(rb.rules)} rules, inputs {', '.join(rb.input_names())}, output {rb.output.name})")
    return EXIT_USAGE if errors else EXIT_OK


def _config(args):
    return load_config(args.config or default_config_path())


def cmd_run(args) -> int:
    cfg = _config(args)
    seeds = _seeds(args.seeds, (), cfg.seed)
    policy = args.policy or cfg.firewall.policy
    results = [run_named(cfg, policy, s) for s in seeds]
    if args.out:
        for r in results:
            write_csv(r, args.out)
    if args.json:
        print(json.dumps([_result_doc(r) for r in results], indent=2))
        return EXIT_OK
    for r in results:
        print(f"policy={r.policy} seed={r.seed} config={r.config_key} events={r.events}")
        print(f"  packets: generated={r.generated} delivered={r.delivered} dropped={r.dropped} in_flight={r.in_flight}")
        for app in APPS:
            s = r.apps[app].summary
            print(f"  [{app}] " + " ".join(f"{m}={_num(s.get(m))}" for m in METRICS))
            if s.drops:
                print(f"  [{app}] drops: " + ", ".join(f"{k}={v}" for k, v in s.drops))
    return EXIT_OK


def _result_doc(r) -> dict:
    return {
        "policy": r.policy,
        "seed": r.seed,
        "config": r.config_key,
        "events": r.events,
        "packets": {"generated": r.generated, "delivered": r.delivered, "dropped": r.dropped, "in_flight": r.in_flight},
        "apps": {
            app: {**{m: r.apps[app].summary.get(m) for m in METRICS}, "drops": dict(r.apps[app].summary.drops)}
            for app in APPS
        },
    }


def _report_doc(rep: ComparisonReport) -> dict:
    return {
        "seeds": list(rep.seeds),
        "summaries": rep.summaries,
        "deltas_pct": rep.deltas,
        "per_seed_deltas_pct": {str(s): d for s, d in rep.per_seed_deltas.items()},
    }


def cmd_compare(args) -> int:
    cfg = _config(args)
    seeds = _seeds(args.seeds, cfg.seeds, cfg.seed)
    if args.jobs is not None and args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    rep = run_comparison(cfg, seeds, jobs=args.jobs)
    written = write_csv(rep, args.out) if args.out else []
    if args.json:
        doc = _report_doc(rep)
        doc["files"] = [str(p) for p in written]
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    print(rep.table())
    print()
    print("per-seed avg_response_s deltas (fuzzy-vs-conventional / fuzzy-vs-none):")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["seed"] + [f"{app}_{pair}" for app in APPS for pair in ("fz_vs_conv", "fz_vs_none")])
    for seed, d in rep.per_seed_deltas.items():
        w.writerow([seed] + [
            _num(d[pair][app]["avg_response_s"])
            for app in APPS
            for pair in ("fuzzy-vs-conventional", "fuzzy-vs-none")
        ])
    if written:
        print(f"\nwrote {len(written)} files to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fuzzwall", description="Fuzzy-controlled firewall model and hybrid-cloud simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")

    s = sub.add_parser("infer", parents=[common], help="security level for one (source, destination) pair")
    s.add_argument("values", nargs="+", metavar="[RULES] SOURCE DESTINATION")
    s.add_argument("--rules", help="rule file (default: bundled tableI.rules)")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("surface", parents=[common], help="CSV grid of the security surface")
    s.add_argument("rules_pos", nargs="?", metavar="RULES")
    s.add_argument("--rules")
    s.add_argument("--grid-n", type=int, default=21)
    s.add_argument("--out", help="write to this file instead of stdout")
    s.set_defaults(func=cmd_surface)

    s = sub.add_parser("rules-check", parents=[common], help="validate a rule file without running it")
    s.add_argument("rules_pos", nargs="?", metavar="RULES")
    s.add_argument("--rules")
    s.set_defaults(func=cmd_rules_check)

    s = sub.add_parser("run", parents=[common], help="simulate one scenario")
    s.add_argument("--config", help="scenario JSON (default: bundled default scenario)")
    s.add_argument("--policy", choices=("none", "conventional", "fuzzy"))
    s.add_argument("--seeds", help="comma-separated seeds (default: the config's seed)")
    s.add_argument("--out", help="directory for time-series CSVs")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("compare", parents=[common], help="all three policies over several seeds")
    s.add_argument("--config")
    s.add_argument("--seeds", help="comma-separated seeds (default: the config's declared seeds)")
    s.add_argument("--out", help="directory for summary and time-series CSVs")
    s.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SimulationError as exc:
        print(f"fuzzwall: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except RuleSyntaxError as exc:
        for d in exc.diagnostics:
            print(f"{exc.source}:{d}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ConfigError, FuzzyError, OSError) as exc:
        print(f"fuzzwall: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
