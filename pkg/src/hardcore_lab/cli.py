"""Command-line front end.

Every verb writes a machine-readable result (JSON by default, CSV with
``--csv``) to ``--out`` when given, and a short human summary to stdout.
Exit codes: 0 success, 1 usage error, 2 validation error, 3 internal
invariant violation (or a failed assertion in ``corpus run``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import containers, fptas, graph, hardcore, polymer
from .errors import InvariantViolation, ValidationError
from .graph import popcount

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_INVARIANT = 0, 1, 2, 3
SIDE_ALIASES = {"X": "X", "Y": "Y", "E": "X", "O": "Y"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# ---- serialization -------------------------------------------------------------------

def jsonable(obj):
    if isinstance(obj, Fraction):
        return obj.numerator if obj.denominator == 1 else float(obj)
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(v) for v in items]
    if hasattr(obj, "item") and callable(obj.item):
        return obj.item()
    return obj


def dump_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":")) + "\n"


def dump_csv(rows: list[dict], fields: list[str] | None = None) -> str:
    buf = io.StringIO()
    if not rows and not fields:
        return ""
    fields = fields or list(rows[0].keys())
    w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_cell(r.get(k)) for k in fields})
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (list, dict, tuple)):
        return json.dumps(jsonable(v), sort_keys=True, separators=(",", ":"))
    return "" if v is None else v


def _write(path, text: str):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _emit(args, payload: dict, rows: list[dict] | None = None, fields=None):
    """Write payload as JSON, or ``rows`` as CSV when --csv is set."""
    if getattr(args, "csv", False):
        _write(args.out, dump_csv(rows if rows is not None else [payload], fields))
    else:
        _write(args.out, dump_json(payload))


# ---- config -------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One CLI invocation in declarative form: verb path plus named parameters."""

    id: str
    command: list
    params: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)

    def to_argv(self, base: Path | None = None) -> list[str]:
        argv = list(self.command)
        for k, v in sorted(self.params.items()):
            if k == "_positional":
                continue
            flag = "--" + k.replace("_", "-")
            if v is True:
                argv.append(flag)
            elif v is False or v is None:
                continue
            else:
                if k in ("graph", "out") and base is not None and not os.path.isabs(str(v)):
                    v = str(base / str(v))
                argv += [flag, str(v)]
        for v in self.params.get("_positional", []):
            if base is not None and not os.path.isabs(str(v)):
                v = str(base / str(v))
            argv.append(str(v))
        return argv

    def to_dict(self) -> dict:
        d = {"id": self.id, "command": list(self.command), "params": dict(self.params)}
        if self.expect:
            d["expect"] = dict(self.expect)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            return cls(str(d["id"]), list(d["command"]), dict(d.get("params", {})),
                       dict(d.get("expect", {})))
        except (KeyError, TypeError) as e:
            raise ValidationError(f"bad experiment entry {d!r}: {e}") from None

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def load_corpus(path) -> list[ExperimentConfig]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read corpus config {path}: {e}") from None
    items = data.get("instances", []) if isinstance(data, dict) else data
    cfgs = [ExperimentConfig.from_dict(d) for d in items]
    ids = [c.id for c in cfgs]
    if len(set(ids)) != len(ids):
        raise ValidationError("corpus instance ids must be unique")
    return cfgs


# ---- parameter helpers ---------------------------------------------------------------

def _load_graph(path) -> graph.BipartiteGraph:
    try:
        return graph.load(path)
    except OSError as e:
        raise ValidationError(f"cannot read graph file {path}: {e}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ValidationError(f"malformed graph file {path}: {e}") from None


def _rational(text) -> Fraction:
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"not a number: {text!r}") from None


def _side(text: str) -> str:
    try:
        return SIDE_ALIASES[text.upper()]
    except KeyError:
        raise ValidationError(f"side must be one of X, Y, E, O; got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None


# ---- verbs ---------------------------------------------------------------------------

def cmd_graph_gen(args, out):
    kinds = [args.hypercube is not None, args.complete is not None, args.regular is not None,
             args.degrees is not None]
    if sum(kinds) != 1:
        raise ValidationError("choose exactly one of --hypercube, --complete, --regular, --degrees")
    if args.hypercube is not None:
        G = graph.hypercube(args.hypercube)
    elif args.complete is not None:
        G = graph.complete_bipartite(*args.complete)
    elif args.regular is not None:
        G = graph.random_regular_bipartite(args.regular[0], args.regular[1], seed=args.seed)
    else:
        xd, yd = args.degrees
        G = graph.random_bipartite_with_degrees(_ints(xd), _ints(yd), seed=args.seed)
    if args.out:
        graph.save(G, args.out)
    print(f"generated graph: |X|={G.x_count} |Y|={G.y_count} edges={len(G.edges)} seed={args.seed}",
          file=out)


def graph_report(G: graph.BipartiteGraph, alpha=None, seed: int = 0) -> dict:
    rep = {"x_count": G.x_count, "y_count": G.y_count, "edges": len(G.edges),
           "d_X": G.d_X, "d_Y": G.d_Y, "delta": G.delta,
           "x_degrees": sorted(set(G.deg_x)), "y_degrees": sorted(set(G.deg_y)),
           "regular": G.is_regular(), "d": G.d_X if G.is_regular() else None}
    if G.n <= graph.EXHAUSTIVE_EXPANSION_LIMIT:
        rep["best_alpha"] = graph.best_expansion_alpha(G)
    if alpha is not None:
        e = graph.check_alpha_expansion(G, alpha, seed=seed)
        rep["expansion"] = {"alpha": e.alpha, "holds": e.holds, "status": e.status,
                            "exhaustive": e.exhaustive}
    return rep


def cmd_graph_check(args, out):
    G = _load_graph(args.path)
    rep = graph_report(G, None if args.alpha is None else _rational(args.alpha), args.seed)
    _emit(args, rep)
    reg = f"regular d={rep['d']}" if rep["regular"] else f"d_X={G.d_X} d_Y={G.d_Y} delta={G.delta}"
    print(f"graph: |X|={G.x_count} |Y|={G.y_count} edges={len(G.edges)}; {reg}", file=out)
    if "expansion" in rep:
        print(f"expansion alpha={args.alpha}: {rep['expansion']['status']}", file=out)


def cmd_containers_enumerate(args, out):
    G = _load_graph(args.graph)
    inst = containers.enumerate_Gag(G, args.a, args.g, override=args.override)
    members = [sorted(G.members("X", m)) for m in inst.members]
    payload = {"a": args.a, "g": args.g, "t": inst.t, "w": inst.w(G), "count": len(members),
               "members": members}
    _emit(args, payload, [{"a": args.a, "g": args.g, "member": m} for m in members],
          ["a", "g", "member"])
    print(f"G(a={args.a}, g={args.g}): {len(members)} sets", file=out)
    for m in members:
        print("  " + " ".join(_label(G, "X", v) for v in m), file=out)


def _label(G, side, v) -> str:
    if G.labels:
        idx = G.mask(side, [v]).bit_length() - 1 + (0 if side == "X" else G.x_count)
        return G.labels.get(idx, str(v))
    return str(v)


def _family_records(G, a, g, phi, gamma, gamma_prime, seed):
    vfam = containers.phi_family(G, a, g, phi, gamma_prime, seed)
    recs = vfam.records(G)
    for F_prime in sorted(vfam.members):
        fam = containers.iterative_psi_family(G, a, g, F_prime, gamma, phi)
        for i, st in enumerate(fam.stages):
            recs.extend(st.records(G, stage=i))
    return recs


def _opt_rational(v):
    return None if v is None else _rational(v)


def cmd_containers_audit(args, out):
    G = _load_graph(args.graph)
    lam = polymer.as_activity(args.__dict__["lambda"], allow_zero=True)
    phi, gp = _opt_rational(args.phi), _opt_rational(args.gamma_prime)
    gamma = _rational(args.gamma)
    rep = containers.container_weight_audit(G, args.a, args.g, lam, gamma=gamma, phi=phi,
                                            gamma_prime=gp, seed=args.seed)
    rep["seed"] = args.seed
    if args.families:
        _write(args.families, dump_json(_family_records(G, args.a, args.g, phi if phi else
                                                         containers.default_phi(G), gamma, gp,
                                                         args.seed)))
    _emit(args, rep, rep.get("stages") or [], ["stage", "family_size", "pairs_over_bound",
                                                "max_log_sum", "max_log_ratio_to_bound"])
    print(f"a={args.a} g={args.g} t={rep['t']} w={rep['w']} lambda={rep['lambda']}", file=out)
    print(f"LHS={rep['lhs_exact']}  log LHS={rep['log_lhs']:.6g}  log RHS={rep['log_rhs']:.6g}",
          file=out)
    for row in rep.get("stages", []):
        print(f"  stage {row['stage']}: {row['family_size']} pairs, "
              f"{row['pairs_over_bound']} above the reconstruction bound", file=out)


def cmd_containers_expander(args, out):
    G = _load_graph(args.graph)
    lam = polymer.as_activity(args.__dict__["lambda"], allow_zero=True)
    rep = containers.expander_container_audit(G, args.a, args.g, lam,
                                              alpha=_opt_rational(args.alpha), seed=args.seed)
    _emit(args, rep)
    print(f"a={args.a} g={args.g}: {rep['branch']}", file=out)
    if "t_bound_holds" in rep:
        print(f"  t={rep['t']} >= alpha g/(1+alpha)={rep['t_bound']:.6g}: {rep['t_bound_holds']}",
              file=out)


def cmd_polymer_expand(args, out):
    G = _load_graph(args.graph)
    rep = polymer.expand(G, _side(args.side), args.__dict__["lambda"], args.kmax)
    _emit(args, rep, [{"k": k, "L": L, "T": T} for k, (L, T) in
                      enumerate(zip(rep["L"], rep["T"][1:]), start=1)], ["k", "L", "T"])
    print(f"side {args.side}: {rep['polymer_count']} polymers, Xi={rep['xi_exact']!r}", file=out)
    print(f"T_{args.kmax + 1}={rep['T'][-1]!r}  log Xi={rep['log_xi']!r}", file=out)


def cmd_polymer_kp(args, out):
    G = _load_graph(args.graph)
    lam = polymer.as_activity(args.__dict__["lambda"])
    model = polymer.defect_model(G, _side(args.side), lam)
    d = args.d if args.d else G.d_X
    f, g = polymer.kp_hypercube_functions(model, d)
    rep = polymer.kp_check(model, f, g, k_max=args.kmax)
    payload = rep.as_dict("|A|/d^1.5", "gamma(d,|A|) clipped at 0")
    payload["slacks"] = rep.slacks
    payload["lambda"] = lam
    _emit(args, payload, [{"polymer": i, "slack": s} for i, s in enumerate(rep.slacks)],
          ["polymer", "slack"])
    print(f"KP hypothesis {'holds' if rep.holds else 'fails'}; min slack {rep.min_slack!r}; "
          f"{len(rep.witnesses)} failing polymers", file=out)


def cmd_hardcore_oracle(args, out):
    G = _load_graph(args.graph)
    lam = polymer.as_activity(args.__dict__["lambda"])
    Z = hardcore.exact_Z(G, lam)
    payload = {"lambda": lam, "Z": str(Z), "logZ": polymer.frac_log(Z),
               "vertices": G.n}
    _emit(args, payload)
    print(f"Z={Z}", file=out)
    print(f"logZ={payload['logZ']!r}", file=out)


def cmd_hardcore_sample(args, out):
    G = _load_graph(args.graph)
    draws = hardcore.sample_mu_hat_batch(G, args.__dict__["lambda"], args.n, seed=args.seed)
    lines = []
    for s in draws:
        rec = {"defect": hardcore.defect_label(G, s.defect), "members": G.global_ids(s.members)}
        lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    _write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    mean = sum(popcount(s.members) for s in draws) / max(1, len(draws))
    print(f"{len(draws)} samples, seed={args.seed}, mean size {mean!r}", file=out)


def cmd_hardcore_glauber(args, out):
    G = _load_graph(args.graph)
    res = hardcore.glauber_run(G, args.__dict__["lambda"], args.steps, seed=args.seed,
                               stride=args.stride, record_visits=False)
    rows = [{"step": t, "size": s, "x_count": x, "y_count": y} for t, s, x, y in res.series]
    _write(args.out, dump_csv(rows, ["step", "size", "x_count", "y_count"]))
    print(f"{args.steps} steps, seed={args.seed}, final size {popcount(res.final)}", file=out)


def cmd_hardcore_thm1(args, out):
    rep = hardcore.occupancy_observables(args.d, args.__dict__["lambda"], args.n, seed=args.seed)
    _emit(args, rep)
    print(f"d={args.d}: mean |I| {rep['mean_size']!r} (reference {rep['target_size']!r}); "
          f"mean minority {rep['mean_minority']!r}; minority is defect "
          f"{rep['minority_is_defect_fraction']!r}", file=out)


def cmd_fptas_approx(args, out):
    G = _load_graph(args.graph)
    res = fptas.approx_logZ(G, _rational(args.alpha), args.__dict__["lambda"], float(args.eps),
                            oracle=args.oracle, attested=args.attested)
    _emit(args, res.as_dict())
    print(f"logZ estimate {res.logZ_estimate!r} (k={res.k_truncation}, "
          f"budget {'met' if res.budget_met else 'not met'})", file=out)
    if res.oracle_logZ is not None:
        print(f"oracle logZ {res.oracle_logZ!r}, error {res.abs_error!r}", file=out)


def cmd_fptas_budget(args, out):
    G = _load_graph(args.graph)
    rep = fptas.epsilon_budget_report(G, args.__dict__["lambda"], args.kmax)
    _emit(args, rep, rep["rows"])
    for row in rep["rows"]:
        err = row.get("abs_error")
        print(f"k={row['k']}: estimate {row['logZ_estimate']!r}"
              + (f", error {err!r}" if err is not None else ""), file=out)


# ---- corpus ----------------------------------------------------------------------------

CORPUS_FIELDS = ["id", "command", "exit_code", "status", "checks", "output", "message"]
STATUS = {EXIT_OK: "ok", EXIT_USAGE: "usage_error", EXIT_VALIDATION: "validation_error",
          EXIT_INVARIANT: "invariant_violation"}


def _dig(data, dotted: str):
    for part in dotted.split("."):
        if isinstance(data, list):
            data = data[int(part)]
        else:
            data = data[part]
    return data


def _run_instance(cfg: ExperimentConfig, base: Path, outdir: Path) -> dict:
    out_path = outdir / f"{cfg.id}.json"
    params = dict(cfg.params)
    params.setdefault("out", str(out_path))
    cfg2 = ExperimentConfig(cfg.id, cfg.command, params, cfg.expect)
    buf = io.StringIO()
    code = dispatch(cfg2.to_argv(base), stdout=buf, stderr=buf)
    row = {"id": cfg.id, "command": " ".join(cfg.command), "exit_code": code,
           "status": STATUS.get(code, "error"), "checks": "",
           "output": os.path.relpath(params["out"], outdir) if code == 0 else "",
           "message": buf.getvalue().strip().splitlines()[-1] if buf.getvalue().strip() else ""}
    if code == 0 and cfg.expect:
        try:
            data = json.loads(Path(params["out"]).read_text())
            failed = []
            for key, want in sorted(cfg.expect.items()):
                got = _dig(data, key)
                ok = (math.isclose(float(got), float(want), rel_tol=1e-9, abs_tol=1e-12)
                      if isinstance(want, (int, float)) and not isinstance(want, bool)
                      else got == want)
                if not ok:
                    failed.append(f"{key}={got!r} != {want!r}")
        except (OSError, ValueError, KeyError, IndexError, TypeError) as e:
            failed = [f"output unreadable: {e}"]
        row["checks"] = "pass" if not failed else "fail"
        if failed:
            row["exit_code"] = EXIT_INVARIANT
            row["status"] = "check_failed"
            row["message"] = "; ".join(failed)
    return row


def corpus_run(config_path, out_csv, outdir=None) -> int:
    cfgs = load_corpus(config_path)
    base = Path(config_path).resolve().parent
    outdir = Path(outdir) if outdir else Path(out_csv).resolve().parent / "corpus_outputs"
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        threads = max(1, int(os.environ.get("HARDCORE_LAB_THREADS", "1")))
    except ValueError:
        threads = 1
    if threads > 1 and len(cfgs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda c: _run_instance(c, base, outdir), cfgs))
    else:
        rows = [_run_instance(c, base, outdir) for c in cfgs]
    rows.sort(key=lambda r: r["id"])
    _write(out_csv, dump_csv(rows, CORPUS_FIELDS) if rows else "")
    return max((r["exit_code"] for r in rows), default=EXIT_OK)


def cmd_corpus_run(args, out):
    code = corpus_run(args.config, args.out, args.outdir)
    print(f"corpus finished with exit code {code}", file=out)
    return code


# ---- parser --------------------------------------------------------------------------

def _common(p, out=True, fmt=True):
    if out:
        p.add_argument("--out", help="output file")
    if fmt:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--json", action="store_true", help="emit JSON (default)")
        g.add_argument("--csv", action="store_true", help="emit CSV")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hardcore-lab", description="hard-core model experiments")
    top = ap.add_subparsers(dest="group", required=True, parser_class=_Parser)

    g = top.add_parser("graph").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    p = g.add_parser("gen")
    p.add_argument("--hypercube", type=int)
    p.add_argument("--complete", type=int, nargs=2, metavar=("M", "N"))
    p.add_argument("--regular", type=int, nargs=2, metavar=("N", "D"))
    p.add_argument("--degrees", nargs=2, metavar=("XDEGS", "YDEGS"))
    _common(p, fmt=False)
    p.set_defaults(func=cmd_graph_gen)
    p = g.add_parser("check")
    p.add_argument("path")
    p.add_argument("--alpha")
    _common(p)
    p.set_defaults(func=cmd_graph_check)

    c = top.add_parser("containers").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    p = c.add_parser("enumerate")
    p.add_argument("--graph", required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--override", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_containers_enumerate)
    p = c.add_parser("audit")
    p.add_argument("--graph", required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--lambda", required=True)
    p.add_argument("--gamma", default=str(containers.DEFAULT_GAMMA))
    p.add_argument("--phi")
    p.add_argument("--gamma-prime")
    p.add_argument("--families", help="write the container families as JSON records")
    _common(p)
    p.set_defaults(func=cmd_containers_audit)
    p = c.add_parser("expander-audit")
    p.add_argument("--graph", required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--lambda", required=True)
    p.add_argument("--alpha")
    _common(p)
    p.set_defaults(func=cmd_containers_expander)

    pm = top.add_parser("polymer").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for name, fn in (("expand", cmd_polymer_expand), ("kp", cmd_polymer_kp)):
        p = pm.add_parser(name)
        p.add_argument("--graph", required=True)
        p.add_argument("--side", default="X")
        p.add_argument("--lambda", required=True)
        p.add_argument("--kmax", type=int, default=6)
        if name == "kp":
            p.add_argument("--d", type=int)
        _common(p)
        p.set_defaults(func=fn)

    h = top.add_parser("hardcore").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    p = h.add_parser("oracle")
    p.add_argument("--graph", required=True)
    p.add_argument("--lambda", required=True)
    _common(p)
    p.set_defaults(func=cmd_hardcore_oracle)
    p = h.add_parser("sample")
    p.add_argument("--graph", required=True)
    p.add_argument("--lambda", required=True)
    p.add_argument("--n", type=int, default=1)
    _common(p, fmt=False)
    p.set_defaults(func=cmd_hardcore_sample)
    p = h.add_parser("glauber")
    p.add_argument("--graph", required=True)
    p.add_argument("--lambda", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--stride", type=int, default=1)
    _common(p, fmt=False)
    p.set_defaults(func=cmd_hardcore_glauber)
    p = h.add_parser("thm1")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", required=True)
    p.add_argument("--n", type=int, default=10000)
    _common(p)
    p.set_defaults(func=cmd_hardcore_thm1)

    f = top.add_parser("fptas").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    p = f.add_parser("approx")
    p.add_argument("--graph", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--lambda", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--attested", action="store_true", help="trust alpha without checking it")
    _common(p)
    p.set_defaults(func=cmd_fptas_approx)
    p = f.add_parser("budget")
    p.add_argument("--graph", required=True)
    p.add_argument("--lambda", required=True)
    p.add_argument("--kmax", type=int, default=8)
    _common(p)
    p.set_defaults(func=cmd_fptas_budget)

    cr = top.add_parser("corpus").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    p = cr.add_parser("run")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="aggregated CSV")
    p.add_argument("--outdir", help="directory for per-instance outputs")
    p.set_defaults(func=cmd_corpus_run)
    return ap


def dispatch(argv=None, stdout=None, stderr=None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(str(e).rstrip(), file=err)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    try:
        code = args.func(args, out)
    except ValidationError as e:
        print(f"validation error: {e}", file=err)
        return EXIT_VALIDATION
    except (InvariantViolation, containers.ResampleBudgetExhausted) as e:
        print(f"invariant violation: {e}", file=err)
        return EXIT_INVARIANT
    return code if isinstance(code, int) else EXIT_OK


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
