"""Command-line entry point: one tool with subcommands for every pipeline
stage plus an end-to-end ``pipeline`` orchestrator.

Exit codes: 0 success, 2 configuration error, 3 stage failure, 4 convergence
diagnostics failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .administer import (
    RunManifest,
    build_rating_plan,
    make_session_plans,
    run_session,
    HttpProvider,
)
from .assemble import InfeasibleError, assemble as solve_assembly
from .core import (
    AssemblyConfig,
    InstructionCondition,
    ResponseFormat,
    SdrkitError,
    load_inventory,
    load_item_pool,
    load_response_sets,
    write_inventory,
    write_item_pool,
    write_response_sets,
    validate_inventory,
)
from .irt import (
    HmcOptions,
    MapOptions,
    build_model_data,
    diagnostics as hmc_diagnostics,
    fit_hmc,
    fit_map,
    fit_theta_frame,
    load_fit_artifact,
    write_fit_artifact,
)
from .metrics import build_shift_table, summarize_effects
from .personas import (
    Lexicon,
    TraitCovariance,
    load_persona_set,
    sample_personas,
    write_persona_set,
)
from .ratings import agreement_stats, aggregate_ratings, load_rating_dataset
from .report import (
    emit_plots,
    write_effect_table,
    write_report_bundle,
    write_tradeoff_table,
)
from .simulate import (
    SimSpec,
    SimulatorProvider,
    default_sim_params,
    load_sim_params,
    write_sim_params,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_DIAGNOSTICS = 4

RHAT_GATE = 1.01
RHAT_SHARE = 0.99


class ConfigError(SdrkitError):
    pass


class DiagnosticsGateError(SdrkitError):
    pass


def _packaged(name: str) -> Path:
    return Path(str(resources.files("sdrkit.data").joinpath(name)))


def _require(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _condition(label: str) -> InstructionCondition:
    alias = {"fake": "fake_good"}
    try:
        return InstructionCondition(alias.get(label, label))
    except ValueError:
        raise ConfigError(f"unknown condition: {label!r}") from None


def _format(label: str) -> ResponseFormat:
    try:
        return ResponseFormat(label)
    except ValueError:
        raise ConfigError(f"unknown format: {label!r}") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_rate_plan(args) -> int:
    pool = load_item_pool(_require(args.pool, "item pool"))
    raters = [r for r in args.raters.split(",") if r]
    if not raters:
        raise ConfigError("need at least one rater id")
    prompts = build_rating_plan(
        pool, raters, replications=args.replications, block_size=args.block_size, seed=args.seed
    )
    payload = [
        {
            "rater": p.rater,
            "replication": p.replication,
            "block_index": p.block_index,
            "item_ids": list(p.item_ids),
            "prompt": p.text,
        }
        for p in prompts
    ]
    Path(args.out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(f"wrote {len(prompts)} rating prompts to {args.out}")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    ds = load_rating_dataset(_require(args.ratings, "rating dataset"))
    table = aggregate_ratings(ds)
    pool = load_item_pool(_require(args.pool, "item pool"))
    rated = pool.with_desirability(table.scores)
    write_item_pool(rated, args.out)
    if args.stats:
        stats_out = {
            rater: asdict(agreement_stats(ds, rater, rng_seed=args.seed))
            for rater in ds.raters
        }
        Path(args.stats).write_text(json.dumps(stats_out, indent=2), encoding="utf-8")
    print(f"aggregated {len(table.scores)} item scores into {args.out}")
    return EXIT_OK


def _assembly_config(args) -> AssemblyConfig:
    if args.config:
        raw = json.loads(_require(args.config, "assembly config").read_text("utf-8"))
        return AssemblyConfig(
            block_count=raw["block_count"],
            per_trait=raw.get("per_trait"),
            per_trait_pair=raw.get("per_trait_pair"),
            mixed_key_range=tuple(raw["mixed_key_range"]) if raw.get("mixed_key_range") else None,
            sign_floor=raw.get("sign_floor", 0.30),
            node_budget=raw.get("node_budget"),
        )
    return AssemblyConfig.standard(args.blocks)


def cmd_assemble(args) -> int:
    pool = load_item_pool(_require(args.pool, "item pool"))
    if args.ratings:
        table = aggregate_ratings(load_rating_dataset(_require(args.ratings, "ratings")))
        pool = pool.with_desirability(table.scores)
    cfg = _assembly_config(args)
    try:
        sol = solve_assembly(pool, cfg)
    except InfeasibleError as exc:
        print(f"assembly infeasible ({exc.family}): {exc}", file=sys.stderr)
        return EXIT_STAGE
    write_inventory(sol.inventory, args.out)
    check = validate_inventory(sol.inventory, pool, cfg)
    report_path = Path(args.out).with_suffix(".report.json")
    report_path.write_text(
        json.dumps(
            {
                "max_gap": check.max_gap,
                "mean_gap": check.mean_gap,
                "trait_counts": check.trait_counts,
                "mixed_key_count": check.mixed_key_count,
                "checks": [
                    {"name": c.name, "passed": c.passed, "detail": c.detail}
                    for c in check.checks
                ],
            },
            indent=2,
        ),
        encoding="utf-8",
    )
    print(
        f"assembled {sol.inventory.block_count} blocks "
        f"(max gap {sol.m_star:.6g}, sse {sol.sse:.6g}) -> {args.out}"
    )
    return EXIT_OK


def cmd_personas(args) -> int:
    cov = None
    if args.covariance:
        raw = json.loads(_require(args.covariance, "covariance file").read_text("utf-8"))
        cov = TraitCovariance(np.array(raw))
    lex = Lexicon.from_file(_require(args.lexicon, "lexicon")) if args.lexicon else None
    ps = sample_personas(args.n, cov=cov, seed=args.seed, lexicon=lex)
    write_persona_set(ps, args.out)
    print(f"sampled {len(ps)} personas -> {args.out}")
    return EXIT_OK


def _build_provider(args, inventory, pool, personas):
    if args.provider == "sim":
        if args.params:
            params = load_sim_params(_require(args.params, "simulator params"))
        else:
            params = default_sim_params(inventory, pool, seed=args.seed)
        spec = SimSpec(fake_good_delta=args.delta, seed=args.seed)
        return SimulatorProvider(inventory, pool, personas, params, spec)
    if args.provider == "http":
        if not args.base_url or not args.model:
            raise ConfigError("http provider needs --base-url and --model")
        return HttpProvider(args.base_url, args.model, token_env=args.token_env)
    raise ConfigError(f"unknown provider: {args.provider!r}")


def cmd_administer(args) -> int:
    inventory = load_inventory(_require(args.inventory, "inventory"))
    pool = load_item_pool(_require(args.pool, "item pool"))
    personas = load_persona_set(_require(args.personas, "persona set"))
    fmt = _format(args.format)
    cond = _condition(args.condition)
    provider = _build_provider(args, inventory, pool, personas)
    plans = make_session_plans(
        list(personas), inventory, pool, [fmt], [cond], seed=args.seed,
        respondent_id=provider.model_id,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sets = []
    failures = 0
    manifest = RunManifest(
        run_id=f"{fmt.value}-{cond.value}", model_id=provider.model_id,
        seeds={"plan": args.seed}, created_at="",
    )
    for plan in plans:
        result = run_session(plan, provider)
        manifest.record_session(result)
        if result.complete:
            sets.append(result.response_set)
        else:
            failures += 1
    out_file = out_dir / f"responses_{fmt.value}_{cond.value}.csv"
    write_response_sets(sets, out_file)
    (out_dir / f"manifest_{fmt.value}_{cond.value}.json").write_text(
        manifest.to_json(), encoding="utf-8"
    )
    print(f"wrote {len(sets)} response sets ({failures} failed sessions) -> {out_file}")
    return EXIT_STAGE if failures and not sets else EXIT_OK


def _load_response_files(path: Path):
    if path.is_dir():
        files = sorted(path.glob("responses_*.csv"))
        if not files:
            raise ConfigError(f"no response files under {path}")
    else:
        files = [path]
    sets = []
    for f in files:
        sets.extend(load_response_sets(f))
    return sets


def cmd_fit(args) -> int:
    inventory = load_inventory(_require(args.inventory, "inventory"))
    pool = load_item_pool(_require(args.pool, "item pool"))
    sets = _load_response_files(_require(args.responses, "response data"))
    fmt = _format(args.format)
    data = build_model_data(sets, inventory, pool, fmt)
    diag_out: dict = {}
    if args.backend == "map":
        fit = fit_map(data, MapOptions(seed=args.seed, n_starts=args.starts))
        theta = fit.theta_hat
        diag_out = {
            "log_posterior": fit.log_posterior,
            "grad_inf_norm": fit.grad_inf_norm,
            "converged": fit.converged,
        }
        params = fit.params
    elif args.backend == "hmc":
        post = fit_hmc(
            data,
            HmcOptions(
                seed=args.seed, chains=args.chains, warmup=args.warmup, samples=args.samples
            ),
        )
        theta = post.theta_hat
        diag = hmc_diagnostics(post)
        share = float(np.mean(diag["rhat"] < RHAT_GATE))
        diag_out = {
            "rhat_max": float(diag["rhat"].max()),
            "rhat_share_below_gate": share,
            "ess_min": float(diag["ess"].min()),
            "divergences": post.divergences,
            "accept_rate": post.accept_rate,
        }
        from .irt import unpack

        params = unpack(data, post.draws.reshape(-1, post.draws.shape[-1]).mean(axis=0))
        if share < RHAT_SHARE:
            write_fit_artifact(
                args.out, data, theta, backend="hmc", item_params=_item_param_dict(data, params),
                diag=diag_out,
            )
            raise DiagnosticsGateError(
                f"only {share:.1%} of parameters have R-hat < {RHAT_GATE}"
            )
    else:
        raise ConfigError(f"unknown backend: {args.backend!r}")
    write_fit_artifact(
        args.out, data, theta, backend=args.backend,
        item_params=_item_param_dict(data, params), diag=diag_out,
    )
    print(f"fitted {data.n_units} response units ({args.backend}) -> {args.out}")
    return EXIT_OK


def _item_param_dict(data, params) -> dict:
    design = data.design
    out = {
        "a_plus": {iid: float(a) for iid, a in zip(design.item_ids, params.a_plus)},
        "thresholds": {},
    }
    keys = design.block_ids if design.model == "gfc" else design.item_ids
    for key, row in zip(keys, params.kappa):
        out["thresholds"][key] = [float(v) for v in row]
    return out


def _summaries_from_fits(fit_paths: dict[str, Path], personas):
    by_id = personas.by_id()
    summaries = []
    for fmt in ("likert", "gfc"):
        if fmt not in fit_paths:
            continue
        frame = fit_theta_frame(load_fit_artifact(fit_paths[fmt]))
        table = build_shift_table(frame)
        honest = {k[1]: v for k, v in frame.items() if k[2] == "honest"}
        ids = sorted(set(honest) & set(by_id))
        if len(ids) < 3:
            raise ConfigError("need at least 3 personas with honest fits for recovery")
        honest_theta = np.array([honest[p] for p in ids])
        z_true = np.array([by_id[p].z for p in ids])
        summaries.append(summarize_effects(fmt, table, honest_theta, z_true))
    if not summaries:
        raise ConfigError("no fit artifacts given")
    return summaries


def cmd_report(args) -> int:
    personas = load_persona_set(_require(args.personas, "persona set"))
    fit_paths = {}
    if args.fit_likert:
        fit_paths["likert"] = _require(args.fit_likert, "likert fit")
    if args.fit_gfc:
        fit_paths["gfc"] = _require(args.fit_gfc, "gfc fit")
    summaries = _summaries_from_fits(fit_paths, personas)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sources = {fmt: str(p) for fmt, p in fit_paths.items()}
    write_effect_table(summaries, out / "effects.csv")
    write_tradeoff_table(summaries, out / "tradeoff.csv")
    write_report_bundle(summaries, out / "report.json", sources=sources)
    emit_plots(summaries, out)
    print(f"wrote report tables and plots -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

_DEFAULT_SEEDS = {"personas": 1, "plan": 2, "sim": 3, "params": 4, "fit": 5}


def _load_pipeline_config(path: Path) -> dict:
    try:
        cfg = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read pipeline config: {exc}") from exc
    cfg.setdefault("pool", str(_packaged("marker_inventory_pool.csv")))
    cfg.setdefault("inventory", str(_packaged("marker_inventory_blocks.csv")))
    cfg.setdefault("n_personas", 50)
    cfg.setdefault("backend", "map")
    cfg.setdefault("formats", ["likert", "gfc"])
    cfg.setdefault("conditions", ["honest", "fake_good"])
    seeds = dict(_DEFAULT_SEEDS)
    seeds.update(cfg.get("seeds", {}))
    cfg["seeds"] = seeds
    provider = {"type": "sim", "fake_good_delta": 1.0, "matched_discrimination": False}
    provider.update(cfg.get("provider", {}))
    cfg["provider"] = provider
    if provider["type"] != "sim":
        raise ConfigError("pipeline currently orchestrates the built-in simulator provider")
    for key in ("pool", "inventory"):
        _require(cfg[key], f"pipeline {key}")
    if cfg.get("ratings"):
        _require(cfg["ratings"], "pipeline ratings")
    if cfg["backend"] not in ("map", "hmc"):
        raise ConfigError(f"unknown backend: {cfg['backend']!r}")
    return cfg


def cmd_pipeline(args) -> int:
    cfg_path = _require(args.config, "pipeline config")
    cfg = _load_pipeline_config(cfg_path)
    out_dir = Path(cfg.get("out_dir", "run"))
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = cfg["seeds"]
    config_hash = hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()
    ).hexdigest()
    artifacts: dict[str, str] = {}

    pool = load_item_pool(cfg["pool"])
    if cfg.get("ratings"):
        table = aggregate_ratings(load_rating_dataset(cfg["ratings"]))
        pool = pool.with_desirability(table.scores)
    inventory = load_inventory(cfg["inventory"])

    # personas (resumable: reuse the file if it exists)
    personas_path = out_dir / "personas.json"
    if not personas_path.exists():
        ps = sample_personas(cfg["n_personas"], seed=seeds["personas"])
        write_persona_set(ps, personas_path)
    personas = load_persona_set(personas_path)
    artifacts["personas.json"] = _sha256(personas_path)

    # simulator parameters
    params_path = out_dir / "sim_params.json"
    if not params_path.exists():
        params = default_sim_params(
            inventory, pool, seed=seeds["params"],
            matched_discrimination=bool(cfg["provider"]["matched_discrimination"]),
        )
        write_sim_params(params, params_path)
    params = load_sim_params(params_path)
    artifacts["sim_params.json"] = _sha256(params_path)

    spec = SimSpec(fake_good_delta=cfg["provider"]["fake_good_delta"], seed=seeds["sim"])
    provider = SimulatorProvider(inventory, pool, personas, params, spec)

    formats = [_format(f) for f in cfg["formats"]]
    conditions = [_condition(c) for c in cfg["conditions"]]
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(exist_ok=True)
    manifest = RunManifest(
        run_id=config_hash[:16], model_id=provider.model_id, seeds=seeds, created_at="",
    )
    for fmt in formats:
        for cond in conditions:
            out_file = runs_dir / f"responses_{fmt.value}_{cond.value}.csv"
            if out_file.exists():
                artifacts[f"runs/{out_file.name}"] = _sha256(out_file)
                continue
            plans = make_session_plans(
                list(personas), inventory, pool, [fmt], [cond],
                seed=seeds["plan"], respondent_id=provider.model_id,
            )
            sets = []
            for plan in plans:
                result = run_session(plan, provider)
                manifest.record_session(result)
                if not result.complete:
                    raise SdrkitError(
                        f"administration failed at unit {result.failed_unit} "
                        f"({fmt.value}/{cond.value})"
                    )
                sets.append(result.response_set)
            write_response_sets(sets, out_file)
            artifacts[f"runs/{out_file.name}"] = _sha256(out_file)

    # fits
    fits_dir = out_dir / "fits"
    fits_dir.mkdir(exist_ok=True)
    fit_paths: dict[str, Path] = {}
    for fmt in formats:
        fit_path = fits_dir / f"fit_{fmt.value}.json"
        fit_paths[fmt.value] = fit_path
        if fit_path.exists():
            artifacts[f"fits/{fit_path.name}"] = _sha256(fit_path)
            continue
        sets = []
        for cond in conditions:
            sets.extend(
                load_response_sets(runs_dir / f"responses_{fmt.value}_{cond.value}.csv")
            )
        data = build_model_data(sets, inventory, pool, fmt)
        if cfg["backend"] == "hmc":
            post = fit_hmc(data, HmcOptions(seed=seeds["fit"]))
            diag = hmc_diagnostics(post)
            share = float(np.mean(diag["rhat"] < RHAT_GATE))
            if share < RHAT_SHARE:
                raise DiagnosticsGateError(
                    f"{fmt.value} fit: only {share:.1%} of parameters below the R-hat gate"
                )
            theta = post.theta_hat
            from .irt import unpack

            params_hat = unpack(data, post.draws.reshape(-1, post.draws.shape[-1]).mean(0))
            diag_out = {
                "rhat_max": float(diag["rhat"].max()),
                "rhat_share_below_gate": share,
            }
        else:
            fit = fit_map(data, MapOptions(seed=seeds["fit"]))
            theta = fit.theta_hat
            params_hat = fit.params
            diag_out = {"log_posterior": fit.log_posterior, "converged": fit.converged}
        write_fit_artifact(
            fit_path, data, theta, backend=cfg["backend"],
            item_params=_item_param_dict(data, params_hat), diag=diag_out,
        )
        artifacts[f"fits/{fit_path.name}"] = _sha256(fit_path)

    # report
    reports_dir = out_dir / "reports"
    reports_dir.mkdir(exist_ok=True)
    summaries = _summaries_from_fits(fit_paths, personas)
    sources = {fmt: f"fits/fit_{fmt}.json" for fmt in fit_paths}
    write_effect_table(summaries, reports_dir / "effects.csv")
    write_tradeoff_table(summaries, reports_dir / "tradeoff.csv")
    write_report_bundle(summaries, reports_dir / "report.json", sources=sources)
    emit_plots(summaries, reports_dir)
    for name in ("effects.csv", "tradeoff.csv", "report.json",
                 "shift_heatmap.svg", "tradeoff_scatter.svg"):
        artifacts[f"reports/{name}"] = _sha256(reports_dir / name)

    manifest.artifacts = artifacts
    manifest.seeds = seeds
    (out_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    print(f"pipeline complete -> {out_dir}")
    return EXIT_OK


def cmd_lint(args) -> int:
    run_dir = _require(args.run_dir, "run directory")
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json under {run_dir}")
    manifest = json.loads(manifest_path.read_text("utf-8"))
    problems = []
    for rel, digest in manifest.get("artifacts", {}).items():
        p = run_dir / rel
        if not p.exists():
            problems.append(f"missing artifact: {rel}")
        elif _sha256(p) != digest:
            problems.append(f"hash mismatch: {rel}")
    report_json = run_dir / "reports" / "report.json"
    if report_json.exists():
        bundle = json.loads(report_json.read_text("utf-8"))
        for fmt, src in bundle["metadata"].get("sources", {}).items():
            if not (run_dir / src).exists() and not Path(src).exists():
                problems.append(f"report {fmt} cites missing fit artifact: {src}")
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_STAGE
    print("manifest consistent: every artifact present with matching hash")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdrkit",
        description="Desirability-matched forced-choice inventory toolkit",
    )
    parser.add_argument("--version", action="version", version=f"sdrkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate-plan", help="emit desirability rating prompts")
    p.add_argument("--pool", required=True)
    p.add_argument("--raters", required=True, help="comma-separated rater ids")
    p.add_argument("--replications", type=int, default=30)
    p.add_argument("--block-size", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rate_plan)

    p = sub.add_parser("aggregate", help="aggregate ratings into item desirability")
    p.add_argument("--ratings", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", help="optional agreement statistics JSON output")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("assemble", help="assemble a desirability-matched inventory")
    p.add_argument("--pool", required=True)
    p.add_argument("--ratings")
    p.add_argument("--config", help="assembly constraint JSON")
    p.add_argument("--blocks", type=int, default=30)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("personas", help="sample ground-truth personas")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--covariance", help="5x5 covariance JSON override")
    p.add_argument("--lexicon", help="lexicon JSON override")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_personas)

    p = sub.add_parser("administer", help="run questionnaire sessions")
    p.add_argument("--inventory", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--personas", required=True)
    p.add_argument("--format", required=True, choices=["likert", "gfc"])
    p.add_argument("--condition", required=True, choices=["honest", "fake", "fake_good"])
    p.add_argument("--provider", default="sim", choices=["sim", "http"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=1.0, help="simulator fake-good shift")
    p.add_argument("--params", help="simulator parameter JSON")
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--token-env", default="SDRKIT_API_TOKEN")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_administer)

    p = sub.add_parser("fit", help="fit the scoring model")
    p.add_argument("--format", required=True, choices=["likert", "gfc"])
    p.add_argument("--responses", required=True, help="response CSV file or directory")
    p.add_argument("--inventory", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--backend", default="map", choices=["map", "hmc"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=4)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--warmup", type=int, default=200)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="effect tables, zones, and SVG plots")
    p.add_argument("--fit-likert")
    p.add_argument("--fit-gfc")
    p.add_argument("--personas", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="run the end-to-end pipeline")
    p.add_argument("--config", required=True, help="pipeline JSON config")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("lint", help="check manifest/artifact consistency")
    p.add_argument("--run-dir", required=True, type=Path)
    p.set_defaults(func=cmd_lint)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DiagnosticsGateError as exc:
        print(f"diagnostics failure: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except SdrkitError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
