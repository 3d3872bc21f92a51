"""Command-line experiment runner.

Every subcommand reads one YAML config (``--config``), validates all of it
and every referenced model document, then computes, and only then writes its
CSV outputs and ``run_manifest.json`` into ``--out``.

Settings are resolved as: command-line flag, then ``SEQMIX_<FLAG>``
environment variable, then the config file, then the built-in default.

Exit codes: 0 success, 2 configuration error, 3 numeric contract violation
(including a failed audit or an unconverged capacity run), 4 resource cap
exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from seqmix import __version__, csvio, serialize
from seqmix.cover import AUDIT_COLUMNS, SlackParams, assemble, dominance_audit
from seqmix.enumeration import DEFAULT_CAP
from seqmix.errors import (
    CapacityError,
    ConfigError,
    ContractError,
    DegenerateConditioningError,
    InputError,
)
from seqmix.families import (
    ChangePointSpec,
    SwitchingKT,
    TypicalMixtureSpec,
    bernoulli_code_length,
    binary_entropy,
    changepoint_value,
    gen_changepoint,
    kt_code_lengths,
    periodic,
    typical_loss_curve,
)
from seqmix.loss import LOSS_COLUMNS, LossReport, dp_dn_iid_grid, exact_dn, mc_dn
from seqmix.measures import Dirac, IIDCategorical, ProcessMeasure, as_seq
from seqmix.minimax import CAPACITY_COLUMNS, JOINT_CAP, capacity_iterate

ENV_PREFIX = "SEQMIX_"
HELP_WIDTH = 88
EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT, EXIT_CAP = 0, 2, 3, 4

COMMON_KEYS = {"command", "seed", "threads", "tolerance", "cap"}
CHANGEPOINT_COLUMNS = ("seed", "t", "changes", "switching_bits", "oracle_bits", "kt_bits",
                       "budget_bits", "within_budget", "value_bits")
TYPICAL_COLUMNS = ("n", "log_prob_bits", "per_symbol_bits", "baseline_bits", "target_bits")
DOMINANCE_COLUMNS = ("mu_id", "dn_rho_bits", "dn_nu_bits")


class AuditFailure(Exception):
    """Raised after outputs are written when a computed check did not hold."""


@dataclass
class Context:
    config_path: Path
    seed: int
    threads: int
    tolerance: float
    cap: int
    seed_given: bool = False       # seed came from the flag or the environment
    documents: dict[str, str] = field(default_factory=dict)   # path -> sha256

    @property
    def base(self) -> Path:
        return self.config_path.parent


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------


def _keys(where: str, d: Any, allowed: set, required: set = frozenset()) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {sorted(missing)}")
    return d


def _int(where: str, v, lo: int = 1) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{where}: expected an integer >= {lo}, got {v!r}")
    return v


def _float(where: str, v, lo: float = -math.inf, hi: float = math.inf, open_lo=False, open_hi=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v) or v < lo or v > hi or (open_lo and v == lo) or (open_hi and v == hi):
        raise ConfigError(f"{where}: {v} outside the allowed range")
    return v


def _int_list(where: str, v, lo: int = 1) -> list[int]:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}: expected a non-empty list of integers")
    return [_int(f"{where}[{i}]", x, lo) for i, x in enumerate(v)]


def _document(ctx: Context, where: str, ref) -> serialize.ModelDocument:
    """A model document given inline or as a path relative to the config file."""
    if isinstance(ref, str):
        path = (ctx.base / ref).resolve()
        if not path.is_file():
            raise ConfigError(f"{where}: document {ref!r} not found")
        text = path.read_text(encoding="utf-8")
        ctx.documents[str(ref)] = hashlib.sha256(text.encode()).hexdigest()
        doc = serialize.loads(text, f"{where} ({ref})")
        if not doc.id:
            doc.id = path.stem
        return doc
    if isinstance(ref, dict):
        return serialize.parse(ref, where)
    raise ConfigError(f"{where}: expected a document path or an inline document")


def _single_measure(ctx: Context, where: str, ref) -> ProcessMeasure:
    """A predictor given as one member mapping or as a document."""
    if isinstance(ref, dict) and "family" in ref:
        member = {k: v for k, v in ref.items() if k != "alphabet"}
        doc = serialize.parse({"kind": "model-class", "alphabet": ref.get("alphabet", 2), "members": [member]},
                              where)
        return doc.members[0]
    doc = _document(ctx, where, ref)
    if doc.weights is not None:
        return doc.measure()
    if len(doc.members) != 1:
        raise ConfigError(f"{where}: expected a single predictor, the document has {len(doc.members)}")
    return doc.members[0]


# ---------------------------------------------------------------------------
# subcommand plans: validate everything, return a runner
# ---------------------------------------------------------------------------

Outputs = dict[str, str]
Runner = Callable[[dict], Outputs]


def _plan_eval_loss(cfg: dict, ctx: Context) -> Runner:
    _keys("config", cfg, COMMON_KEYS | {"environments", "predictors", "pairing", "horizons", "method",
                                        "samples"}, {"environments", "predictors", "horizons"})
    envs = _document(ctx, "environments", cfg["environments"])
    preds = _document(ctx, "predictors", cfg["predictors"])
    if envs.alphabet != preds.alphabet:
        raise ConfigError("environments and predictors use different alphabets")
    horizons = _int_list("horizons", cfg["horizons"])
    method = cfg.get("method", "auto")
    if method not in ("auto", "exact", "dp", "monte-carlo"):
        raise ConfigError(f"method: expected auto, exact, dp or monte-carlo, got {method!r}")
    samples = _int("samples", cfg.get("samples", 1000), 2)
    pairing = cfg.get("pairing", "product")
    if pairing == "product":
        pairs = [(mu, rho) for mu in envs.members for rho in preds.members]
    elif pairing == "zip":
        if len(envs.members) != len(preds.members):
            raise ConfigError("pairing 'zip' needs as many predictors as environments")
        pairs = list(zip(envs.members, preds.members))
    else:
        raise ConfigError(f"pairing: expected product or zip, got {pairing!r}")

    def dp_ok(mu, rho):
        return isinstance(mu, IIDCategorical) and rho.count_sufficient and mu.A == 2

    if method == "dp":
        bad = [f"{mu.tag} vs {rho.tag}" for mu, rho in pairs if not dp_ok(mu, rho)]
        if bad:
            raise ConfigError(f"method dp needs a binary i.i.d. environment and a count-based predictor: {bad[0]}")
    if method in ("auto", "exact"):
        for mu, rho in pairs:
            if method == "exact" or not dp_ok(mu, rho):
                worst = mu.A ** max(horizons)
                if worst > ctx.cap and not isinstance(mu, Dirac):
                    raise CapacityError(f"exhaustive enumeration of {mu.A}^{max(horizons)} sequences "
                                        f"for {mu.tag}", ctx.cap)

    def run(timings: dict) -> Outputs:
        t0 = time.perf_counter()
        rows = []
        grids: dict[int, np.ndarray] = {}
        nmax = max(horizons)
        for mu, rho in pairs:
            for n in horizons:
                if method == "monte-carlo":
                    rep = mc_dn(mu, rho, n, samples, ctx.seed, workers=ctx.threads)
                elif method == "dp" or (method == "auto" and dp_ok(mu, rho)):
                    key = id(rho)
                    if key not in grids:
                        thetas = [m.theta[1] for m, r in pairs if r is rho and dp_ok(m, r)]
                        grids[key] = dict(zip(thetas, dp_dn_iid_grid(thetas, rho, nmax)))
                    d = float(grids[key][mu.theta[1]][n - 1])
                    rep = LossReport(n, max(d, 0.0), "dp", mu=mu.tag, rho=rho.tag)
                else:
                    rep = exact_dn(mu, rho, n, cap=ctx.cap)
                rows.append(rep.row())
        timings["eval_loss"] = time.perf_counter() - t0
        return {"loss.csv": csvio.render(LOSS_COLUMNS, rows)}

    return run


def _plan_extract(cfg: dict, ctx: Context) -> Runner:
    _keys("config", cfg, COMMON_KEYS | {"class", "rho", "grid", "audit"}, {"class", "rho", "grid", "audit"})
    doc = _document(ctx, "class", cfg["class"])
    C = doc.members
    rho = _single_measure(ctx, "rho", cfg["rho"])
    if rho.A != doc.alphabet:
        raise ConfigError("rho and the class use different alphabets")
    grid_raw = cfg["grid"]
    if not isinstance(grid_raw, list) or not grid_raw:
        raise ConfigError("grid: expected a non-empty list of [n, k] pairs")
    grid = []
    for i, g in enumerate(grid_raw):
        if not isinstance(g, list) or len(g) != 2:
            raise ConfigError(f"grid[{i}]: expected [n, k]")
        grid.append((_int(f"grid[{i}].n", g[0]), _int(f"grid[{i}].k", g[1])))
    if len(set(grid)) != len(grid):
        raise ConfigError("grid: duplicate entries")
    audit = _keys("audit", cfg["audit"], {"n", "k", "a"}, {"a"})
    an = _int("audit.n", audit.get("n", grid[0][0]))
    ak = _int("audit.k", audit.get("k", grid[0][1]))
    if (an, ak) not in grid:
        raise ConfigError(f"audit: ({an}, {ak}) is not a grid entry")
    try:
        slack = SlackParams(_float("audit.a", audit["a"], 0.0, open_lo=True), ak, math.log2(doc.alphabet))
    except InputError as exc:
        raise ConfigError(f"audit: {exc}") from exc
    for n, _ in grid:
        if len(C) * doc.alphabet**n > 4 * ctx.cap:
            raise CapacityError(f"class table {len(C)} x {doc.alphabet}^{n}", ctx.cap)

    def run(timings: dict) -> Outputs:
        t0 = time.perf_counter()
        ex = assemble(C, rho, grid, cap=ctx.cap)
        timings["assemble"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        rep = dominance_audit(C, rho, ex, an, ak, slack, cap=ctx.cap)
        timings["audit"] = time.perf_counter() - t0
        ids = [f"{j}:{mu.tag}" for j, mu in enumerate(C)]
        out = {
            "extracted.yaml": serialize.dumps(serialize.extracted_doc(ex, f"{doc.id or 'class'}-extracted")),
            "audit.csv": csvio.render(AUDIT_COLUMNS, [r.row() for r in rep.rows]),
            "dominance.csv": csvio.render(DOMINANCE_COLUMNS, zip(ids, rep.dn_rho, rep.dn_nu)),
        }
        if not rep.passed:
            raise AuditFailure("; ".join(rep.failures()[:5]), out)
        return out

    return run


def _plan_capacity(cfg: dict, ctx: Context) -> Runner:
    _keys("config", cfg, COMMON_KEYS | {"classes", "horizons", "max_iter"}, {"classes", "horizons"})
    refs = cfg["classes"]
    if not isinstance(refs, list) or not refs:
        raise ConfigError("classes: expected a non-empty list of documents")
    docs = [_document(ctx, f"classes[{i}]", r) for i, r in enumerate(refs)]
    ids = [d.id or f"class{i}" for i, d in enumerate(docs)]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"classes: duplicate class ids {ids}")
    horizons = _int_list("horizons", cfg["horizons"])
    max_iter = _int("max_iter", cfg.get("max_iter", 200_000))
    for d, cid in zip(docs, ids):
        for n in horizons:
            if len(d.members) * d.alphabet**n > JOINT_CAP:
                raise CapacityError(f"class {cid}: joint table |C| A^n at n={n}", JOINT_CAP)

    def run(timings: dict) -> Outputs:
        t0 = time.perf_counter()
        rows, out, unconverged = [], {}, []
        for d, cid in zip(docs, ids):
            for n in horizons:
                res = capacity_iterate(d.members, n, tol=ctx.tolerance, max_iter=max_iter)
                rows.append(res.row(cid))
                out[f"prior_{cid}_n{n}.yaml"] = serialize.dumps(serialize.prior_doc(d.members, res, cid))
                if not res.converged:
                    unconverged.append(f"{cid} at n={n} (gap {res.gap:.3g})")
        timings["capacity"] = time.perf_counter() - t0
        out["capacity.csv"] = csvio.render(CAPACITY_COLUMNS, rows)
        if unconverged:
            raise AuditFailure("not converged: " + ", ".join(unconverged), out)
        return out

    return run


def _plan_changepoint(cfg: dict, ctx: Context) -> Runner:
    _keys("config", cfg, COMMON_KEYS | {"alpha", "n", "alpha_hat", "thetas", "change_every", "seeds",
                                        "checkpoints", "budget_slack"}, {"alpha", "n"})
    alpha = _float("alpha", cfg["alpha"], 0.0, 1.0, open_hi=True)
    n = _int("n", cfg["n"])
    alpha_hat = _float("alpha_hat", cfg.get("alpha_hat", alpha), 0.0, 1.0, open_lo=True, open_hi=True) \
        if "alpha_hat" in cfg or alpha > 0 else None
    if alpha_hat is None:
        raise ConfigError("alpha_hat: required when alpha is 0")
    thetas = cfg.get("thetas")
    if thetas is not None:
        if not isinstance(thetas, list) or not thetas:
            raise ConfigError("thetas: expected a non-empty list")
        thetas = [_float(f"thetas[{i}]", t, 0.0, 1.0) for i, t in enumerate(thetas)]
    every = cfg.get("change_every")
    if every is not None:
        every = _int("change_every", every)
    seeds = _int_list("seeds", cfg["seeds"], 0) if "seeds" in cfg and not ctx.seed_given else [ctx.seed]
    checkpoints = _int_list("checkpoints", cfg["checkpoints"]) if "checkpoints" in cfg else \
        sorted({2**j for j in range(int(math.log2(n)) + 1)} | {n})
    if max(checkpoints) > n:
        raise ConfigError(f"checkpoints: must not exceed n = {n}")
    slack = _float("budget_slack", cfg.get("budget_slack", 0.02), 0.0)
    spec = ChangePointSpec(alpha, n, tuple(thetas) if thetas else None, every)
    value = changepoint_value(alpha) if alpha > 0 else 0.0
    predictor = SwitchingKT(alpha_hat)

    def run(timings: dict) -> Outputs:
        t0 = time.perf_counter()
        rows, out = [], {}
        for s in seeds:
            tr = gen_changepoint(spec, s)
            sw = predictor.code_lengths(tr.seq)
            oracle = kt_code_lengths(tr.seq, tr.change_times)
            kt = kt_code_lengths(tr.seq)
            for t in checkpoints:
                c = int(np.count_nonzero(tr.change_times < t))
                budget = c * math.log2(1 / alpha_hat) + t * math.log2(1 / (1 - alpha_hat)) + slack * t
                excess = sw[t - 1] - oracle[t - 1]
                rows.append((s, t, c, sw[t - 1], oracle[t - 1], kt[t - 1], budget, bool(excess <= budget), value))
            out[f"changepoint_trace_s{s}.csv"] = csvio.render(
                ("t", "symbol", "is_change", "theta"), tr.rows())
        timings["changepoint"] = time.perf_counter() - t0
        out["changepoint_loss.csv"] = csvio.render(CHANGEPOINT_COLUMNS, rows)
        return out

    return run


def _plan_typical(cfg: dict, ctx: Context) -> Runner:
    _keys("config", cfg, COMMON_KEYS | {"p_star", "J", "L", "sequence", "checkpoints"}, {"sequence"})
    p = cfg.get("p_star", "1/3")
    try:
        p_star = Fraction(str(p))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"p_star: {p!r} is not a number or fraction") from exc
    try:
        spec = TypicalMixtureSpec(p_star, _int("J", cfg.get("J", 12)), _int("L", cfg.get("L", 6)))
    except InputError as exc:
        raise ConfigError(str(exc)) from exc
    seq_cfg = _keys("sequence", cfg["sequence"], {"pattern", "n", "symbols"})
    if "symbols" in seq_cfg:
        if set(seq_cfg) != {"symbols"}:
            raise ConfigError("sequence: give either symbols or pattern and n")
        try:
            x = as_seq(str(seq_cfg["symbols"]), 2)
        except InputError as exc:
            raise ConfigError(f"sequence.symbols: {exc}") from exc
    else:
        _keys("sequence", seq_cfg, {"pattern", "n"}, {"pattern", "n"})
        try:
            pattern = as_seq(str(seq_cfg["pattern"]), 2)
        except InputError as exc:
            raise ConfigError(f"sequence.pattern: {exc}") from exc
        if pattern.size == 0:
            raise ConfigError("sequence.pattern: must be non-empty")
        x = periodic(pattern, _int("sequence.n", seq_cfg["n"]))
    if x.size == 0:
        raise ConfigError("sequence: must be non-empty")
    n = int(x.size)
    checkpoints = _int_list("checkpoints", cfg["checkpoints"]) if "checkpoints" in cfg else \
        sorted({2**j for j in range(int(math.log2(n)) + 1)} | {n})
    if max(checkpoints) > n:
        raise ConfigError(f"checkpoints: must not exceed the sequence length {n}")
    target = binary_entropy(float(p_star))

    def run(timings: dict) -> Outputs:
        t0 = time.perf_counter()
        curve = typical_loss_curve(spec, x, checkpoints)
        rows = []
        for t, per in curve:
            base = bernoulli_code_length(x[:t], float(p_star)) / t
            rows.append((t, -per * t, per, base, target))
        timings["typical"] = time.perf_counter() - t0
        return {"typical_curve.csv": csvio.render(TYPICAL_COLUMNS, rows)}

    return run


PLANS = {
    "eval-loss": (_plan_eval_loss, "Expected cumulative log-loss d_n of predictors on environments."),
    "extract": (_plan_extract, "Greedy cover extraction of a mixture predictor, with dominance audit."),
    "capacity": (_plan_capacity, "Finite-horizon minimax value and least favourable prior of a class."),
    "changepoint": (_plan_changepoint, "Switching predictor on seeded change-point data against the restart oracle."),
    "typical": (_plan_typical, "Loss curve of the typical-sequence mixture on a binary sequence."),
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _formatter(prog):
    return argparse.RawDescriptionHelpFormatter(prog, width=HELP_WIDTH, max_help_position=28)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run options")
    g.add_argument("--config", metavar="PATH", help="YAML experiment config (env SEQMIX_CONFIG)")
    g.add_argument("--out", metavar="DIR", help="output directory (env SEQMIX_OUT, default ./seqmix-out)")
    g.add_argument("--seed", metavar="U64", help="random seed (env SEQMIX_SEED, default 0)")
    g.add_argument("--threads", metavar="N", help="Monte Carlo worker streams (env SEQMIX_THREADS, default 1)")
    g.add_argument("--tolerance", metavar="FLOAT",
                   help="capacity stopping tolerance in bits/symbol (env SEQMIX_TOLERANCE, default 1e-6)")
    parser = argparse.ArgumentParser(
        prog="seqmix",
        description="Finite-horizon experiments with Bayesian mixture predictors.",
        epilog="exit codes: 0 ok, 2 config error, 3 contract or audit failure, 4 resource cap exceeded",
        formatter_class=_formatter,
    )
    parser.add_argument("--version", action="version", version=f"seqmix {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (_, text) in PLANS.items():
        sub.add_parser(name, parents=[common], help=text, description=text, formatter_class=_formatter)
    return parser


def _setting(args, name: str, cfg: dict, default):
    flag = getattr(args, name)
    if flag is not None:
        return flag, True
    env = os.environ.get(ENV_PREFIX + name.upper())
    if env is not None:
        return env, True
    return cfg.get(name, default), False


def _context(args) -> tuple[Context, dict, Path]:
    path, _ = _setting(args, "config", {}, None)
    if not path:
        raise ConfigError("no config given (use --config or SEQMIX_CONFIG)")
    path = Path(path)
    try:
        cfg = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    if cfg.get("command", args.command) != args.command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {args.command!r}")
    out, _ = _setting(args, "out", {}, "seqmix-out")
    seed, seed_flag = _setting(args, "seed", cfg, 0)
    threads, _ = _setting(args, "threads", cfg, 1)
    tol, _ = _setting(args, "tolerance", cfg, 1e-6)
    cap, _ = _setting(argparse.Namespace(cap=None), "cap", cfg, DEFAULT_CAP)
    try:
        seed, threads, cap = int(seed), int(threads), int(cap)
        tol = float(tol)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numeric setting: {exc}") from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    if not (tol > 0 and math.isfinite(tol)):
        raise ConfigError("tolerance must be positive")
    if cap < 1:
        raise ConfigError("cap must be positive")
    ctx = Context(path.resolve(), seed, threads, tol, cap, seed_given=seed_flag)
    return ctx, cfg, Path(out)


def _config_hash(command: str, cfg: dict, ctx: Context) -> str:
    blob = json.dumps({"command": command, "config": cfg, "seed": ctx.seed, "threads": ctx.threads,
                       "tolerance": ctx.tolerance, "cap": ctx.cap, "documents": ctx.documents},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _write(out_dir: Path, files: Outputs, manifest: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text, encoding="utf-8")
    manifest["outputs"] = {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())}
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        ctx, cfg, out_dir = _context(args)
        if out_dir.exists() and not out_dir.is_dir():
            raise ConfigError(f"output path {out_dir} exists and is not a directory")
        t0 = time.perf_counter()
        runner = PLANS[args.command][0](dict(cfg), ctx)
        timings = {"validate": time.perf_counter() - t0}
    except (ConfigError, InputError) as exc:
        print(f"seqmix: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"seqmix: resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    manifest = {"command": args.command, "version": __version__, "config_hash": _config_hash(args.command, cfg, ctx),
                "started_unix": started, "seed": ctx.seed, "threads": ctx.threads, "timings_s": timings}
    code = EXIT_OK
    try:
        files = runner(timings)
    except AuditFailure as exc:
        message, files = exc.args
        print(f"seqmix: check failed: {message}", file=sys.stderr)
        code = EXIT_CONTRACT
    except (ContractError, DegenerateConditioningError) as exc:
        print(f"seqmix: numeric contract violated: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except CapacityError as exc:
        print(f"seqmix: resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except InputError as exc:
        print(f"seqmix: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest["wall_clock_s"] = time.time() - started
    manifest["exit_code"] = code
    _write(out_dir, files, manifest)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
