"""Command line interface.

Subcommands: ``train`` fits the policy and autoencoder artifacts, ``explain``
answers a single "why not this action" query, ``benchmark`` runs the full
method comparison, and ``serve`` starts the HTTP API. Flags override config
file values, and the effective configuration is echoed into every artifact.

Set ``RACCER_LOG`` (debug/info/warning/error) to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .autoencoder import MlpAutoencoder, train_autoencoder
from .benchmark import format_summary, run_benchmark, write_dataset, write_records
from .env import GridConfig, GridState, GridWorld, action_by_label
from .errors import ConfigError
from .genetic import run_genetic
from .policy import (PolicyOracle, collect_rollout_states, evaluate_policy,
                     load_policy, save_policy, train_policy)
from .runconfig import METHOD_CHOICES, RunConfig
from .search import Counterfactual, search

logger = logging.getLogger(__name__)

_LOG_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO,
               "warning": logging.WARNING, "error": logging.ERROR}


def _setup_logging() -> None:
    name = os.environ.get("RACCER_LOG", "warning").strip().lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    logging.getLogger("raccer").setLevel(level)


# -- shared loading ----------------------------------------------------------

def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    cfg.apply_flags(seed=getattr(args, "seed", None),
                    method=getattr(args, "method", None),
                    out=getattr(args, "out", None))
    return cfg


def _make_env(cfg: RunConfig) -> GridWorld:
    grid = GridConfig.load(cfg.env_config) if cfg.env_config else GridConfig()
    return GridWorld(grid)


def _load_artifacts(cfg: RunConfig, env: GridWorld
                    ) -> tuple[PolicyOracle, MlpAutoencoder]:
    if not Path(cfg.policy_path).exists() or \
            not Path(cfg.autoencoder_path).exists():
        raise ConfigError(
            f"missing artifacts ({cfg.policy_path}, {cfg.autoencoder_path}); "
            "run `raccer train` first")
    table = load_policy(env, cfg.policy_path)
    model = MlpAutoencoder.load(cfg.autoencoder_path)
    return PolicyOracle(env, table), model


def _parse_state(env: GridWorld, text: str) -> GridState:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--state is not valid JSON: {exc}") from None
    if not isinstance(raw, list) or len(raw) != env.feature_length or \
            not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                    for v in raw):
        raise ConfigError(
            f"--state must be a JSON array of {env.feature_length} numbers: "
            "[agent_row, agent_col, dragon_row, dragon_col, hp per row]")
    try:
        return env.decode_features(np.asarray(raw, dtype=np.float64))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _explain_once(env: GridWorld, oracle: PolicyOracle, model: MlpAutoencoder,
                  cfg: RunConfig, state: GridState, action
                  ) -> Counterfactual | None:
    if cfg.method == "bo-gen":
        cf, _ = run_genetic(state, action, oracle, model,
                            cfg.ga_config(cfg.seed), cfg.loss_weights())
        return cf
    return search(env, oracle, state, action, cfg.search_config(cfg.seed),
                  autoencoder=model)


# -- subcommands -------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    env = _make_env(cfg)
    tr = cfg.training

    table, curve = train_policy(
        env, episodes=tr["episodes"], alpha=tr["alpha"], gamma=tr["gamma"],
        eps_start=tr["eps_start"], eps_end=tr["eps_end"],
        replay_passes=tr["replay_passes"], seed=cfg.seed)
    success, mean_return = evaluate_policy(env, table, seed=cfg.seed)

    states = collect_rollout_states(env, table, tr["rollout_states"],
                                    seed=cfg.seed)
    data = np.array([env.encode_features(s) for s in states], dtype=np.float64)
    model, history = train_autoencoder(
        data, hidden=tr["ae_hidden"], latent=tr["ae_latent"],
        epochs=tr["ae_epochs"], lr=tr["ae_lr"], seed=cfg.seed)

    for path in (cfg.policy_path, cfg.autoencoder_path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    save_policy(table, env, cfg.policy_path)
    model.save(cfg.autoencoder_path)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "config": cfg.to_dict(),
        "policy": {
            "episodes": tr["episodes"],
            "eval_success_rate": success,
            "eval_mean_return": mean_return,
            "path": cfg.policy_path,
        },
        "autoencoder": {
            "epochs": tr["ae_epochs"],
            "final_loss": history[-1],
            "training_states": len(states),
            "path": cfg.autoencoder_path,
        },
    }
    report_path = out_dir / "train_report.json"
    report_path.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")

    print(f"policy: {cfg.policy_path} "
          f"(success rate {success:.3f}, mean return {mean_return:.3f})")
    print(f"autoencoder: {cfg.autoencoder_path} "
          f"(final loss {history[-1]:.6g})")
    print(f"report: {report_path}")
    return 0


def _property_lines(cf: Counterfactual) -> list[str]:
    p = cf.properties
    return [
        f"  reachability_hat  {p.reachability_hat:.6f}",
        f"  cost_hat          {p.cost_hat:.6f}",
        f"  uncertainty       {p.uncertainty:.6f}",
        f"  proximity         {p.proximity:.6f}",
        f"  sparsity          {p.sparsity:.6f}",
        f"  dmc               {p.dmc:.6f}",
    ]


def cmd_explain(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    env = _make_env(cfg)
    oracle, model = _load_artifacts(cfg, env)
    state = _parse_state(env, args.state)
    try:
        action = action_by_label(args.action)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    greedy = oracle.predict(state)
    cf = _explain_once(env, oracle, model, cfg, state, action)

    lines = [
        f"method: {cfg.method}   seed: {cfg.seed}",
        f"factual state (policy chooses {greedy.label}):",
        _indent(env.render(state)),
        f"desired action: {action.label}",
    ]
    record: dict = {
        "config": cfg.to_dict(),
        "query": {"state": [int(v) for v in env.encode_features(state)],
                  "desired_action": action.label,
                  "policy_action": greedy.label},
        "found": cf is not None,
    }
    if cf is None:
        lines.append("no counterfactual found within budget")
        record["counterfactual"] = None
    else:
        lines.append("counterfactual state "
                     f"(policy chooses {action.label}):")
        lines.append(_indent(env.render(cf.state)))
        labels = [a.label for a in cf.actions]
        lines.append("action sequence: "
                     + (" ".join(labels) if labels else "(empty)"))
        lines.append(f"loss: {cf.loss:.6f}")
        lines.append("properties:")
        lines.extend(_property_lines(cf))
        record["counterfactual"] = {
            "state": [int(v) for v in env.encode_features(cf.state)],
            "actions": labels,
            "loss": cf.loss,
            "properties": cf.properties.to_dict(),
        }
    print("\n".join(lines))

    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")
        print(f"record: {out}")
    return 0


def _indent(block: str) -> str:
    return "\n".join("  " + line for line in block.splitlines())


def cmd_benchmark(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    if args.method:
        cfg.benchmark["methods"] = [args.method]
    env = _make_env(cfg)
    oracle, model = _load_artifacts(cfg, env)

    g = cfg.genetic
    result = run_benchmark(
        env, oracle, model,
        methods=tuple(cfg.benchmark["methods"]),
        n_states=cfg.benchmark["n_states"],
        seed=cfg.seed,
        search_kw=dict(cfg.search),
        ga_kw={"mu": g["mu"], "lam": g["lambda"],
               "generations": g["generations"],
               "mutation_prob": g["mutation_prob"]},
        weights=cfg.loss_weights(),
        jobs=args.jobs)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records(result.records, out_dir / "records.csv")
    write_dataset(result.queries, out_dir / "dataset.jsonl")
    summary_text = format_summary(result.summary)
    (out_dir / "summary.tsv").write_text(summary_text)
    # Worker count changes scheduling only, never results, so it is not
    # part of the echoed configuration.
    (out_dir / "config.json").write_text(cfg.echo())

    print(summary_text, end="")
    print(f"artifacts: {out_dir}/records.csv, {out_dir}/summary.tsv, "
          f"{out_dir}/dataset.jsonl, {out_dir}/config.json")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    cfg = _run_config(args)
    env = _make_env(cfg)
    if args.static is not None and not Path(args.static).is_dir():
        raise ConfigError(f"static directory not found: {args.static}")
    oracle, model = _load_artifacts(cfg, env)
    app = create_app(env, oracle, model, cfg, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- parser ------------------------------------------------------------------

def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit int")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _port(text: str) -> int:
    value = int(text)
    if not 0 < value < 2 ** 16:
        raise argparse.ArgumentTypeError("port must lie in 1..65535")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raccer",
        description="Counterfactual explanations for a grid-world policy.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", metavar="PATH",
                        help="run configuration JSON file")
        sp.add_argument("--seed", type=_u64, metavar="U64",
                        help="master seed (overrides config)")

    train = sub.add_parser("train", help="fit the policy and autoencoder")
    common(train)
    train.add_argument("--out", metavar="PATH",
                       help="report directory (overrides config out_dir)")
    train.set_defaults(func=cmd_train)

    explain = sub.add_parser("explain", help="explain one decision")
    common(explain)
    explain.add_argument("--method", choices=METHOD_CHOICES,
                         help="generation method (overrides config)")
    explain.add_argument("--state", required=True, metavar="JSON",
                         help="feature array, e.g. '[3,2,0,2,1,0,2,0,1]'")
    explain.add_argument("--action", required=True, metavar="NAME",
                         help="desired action label, e.g. SHOOT")
    explain.add_argument("--out", metavar="PATH",
                         help="also write the result as JSON")
    explain.set_defaults(func=cmd_explain)

    bench = sub.add_parser("benchmark", help="run the method comparison")
    common(bench)
    bench.add_argument("--method", choices=METHOD_CHOICES,
                       help="restrict the run to one method")
    bench.add_argument("--out", metavar="PATH",
                       help="output directory (overrides config out_dir)")
    bench.add_argument("--jobs", type=_positive, default=1, metavar="N",
                       help="worker processes (default 1)")
    bench.set_defaults(func=cmd_benchmark)

    serve = sub.add_parser("serve", help="start the HTTP API")
    common(serve)
    serve.add_argument("--port", type=_port, default=8000, metavar="U16")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--static", default=None, metavar="DIR",
                       help="serve a built UI from this directory at /")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
