"""Command-line front end. Every analysis command prints one JSON document
to stdout so runs can be scripted and diffed; files go wherever --out points.

Exit codes: 0 success, 1 domain or data failure, 2 usage error.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .domain import Dataset, DomainError, Variant, restless4_spec, stationary2_spec
from .envgen import default_groups, gen_stationary_games
from .estim import (
    RECOVERY_PRESETS,
    RunawayError,
    fit_hier,
    fit_qcare,
    map_fit,
    psis_loo,
    run_recovery,
)
from .estim.loo import compare
from .ident import dataset_ident_report
from .metrics import (
    bayes_regret,
    curves_to_csv,
    exploitation_rate,
    exploitation_to_csv,
    realized_regret,
)
from .runner import RunPlan, run, sweep_eps, sweep_ucb_c
from .store import (
    StoreError,
    export_dataset,
    export_group,
    import_dataset,
    import_human_csv,
    load_config,
)

SPEC_BY_VARIANT = {
    Variant.STATIONARY2.value: stationary2_spec,
    Variant.RESTLESS4.value: restless4_spec,
}


def emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2, default=str))


def friendly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DomainError, StoreError, RunawayError, FileNotFoundError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def parse_params(pairs: tuple[str, ...]) -> dict[str, float]:
    out: dict[str, float] = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.BadParameter(f"expected key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        try:
            out[k] = float(v)
        except ValueError as exc:
            raise click.BadParameter(f"{k} must be numeric, got {v!r}") from exc
    return out


@click.group()
@click.version_option(__version__, prog_name="banditlab")
def main() -> None:
    """Bandit experiments, choice-model fits, and the session service."""


@main.command("gen-env")
@click.option("--variant", type=click.Choice(list(SPEC_BY_VARIANT)), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--games", default=20, show_default=True, help="stationary only")
@click.option("--seed", default=0, show_default=True, help="stationary only")
@friendly
def gen_env(variant: str, out_dir: Path, games: int, seed: int) -> None:
    """Write environment tables: reward groups, or stationary game means."""
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = SPEC_BY_VARIANT[variant]()
    if variant == Variant.RESTLESS4.value:
        written = []
        for gid, group in default_groups(spec).items():
            base = out_dir / f"group{gid}"
            export_group(group, base, spec)
            written.append(str(base))
        emit({"variant": variant, "groups": written})
    else:
        gs = gen_stationary_games(spec, n_games=games, seed=seed)
        path = out_dir / "stationary_games.json"
        path.write_text(
            json.dumps(
                {
                    "seed": seed,
                    "games": [{"game": g.game_index, "means": list(g.true_means)} for g in gs],
                },
                indent=2,
            )
        )
        emit({"variant": variant, "out": str(path), "n_games": games})


@main.command("run")
@click.option("--variant", type=click.Choice(list(SPEC_BY_VARIANT)))
@click.option("--agent", "agent_kind",
              type=click.Choice(["ucb", "ts", "eps", "sm1", "sm2", "sm3", "probit", "qcare"]))
@click.option("--param", "params", multiple=True, help="agent parameter, key=value")
@click.option("--trials", type=int, default=None, help="[default: 300]")
@click.option("--trials-per-subject", type=int, default=None)
@click.option("--seed", type=int, default=None, help="[default: 0]")
@click.option("--horizon", type=int, default=None, help="override rounds per game")
@click.option("--label", default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              help="YAML with the same keys; flags win")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@friendly
def run_cmd(variant, agent_kind, params, trials, trials_per_subject, seed, horizon,
            label, config_path, out: Path) -> None:
    """Simulate an agent and write the dataset."""
    cfg = load_config(config_path) if config_path else {}
    variant = variant or cfg.get("variant")
    agent_kind = agent_kind or cfg.get("agent")
    if not variant or not agent_kind:
        raise click.UsageError("need --variant and --agent (or a config providing them)")
    merged = dict(cfg.get("params", {}))
    merged.update(parse_params(params))
    spec_kwargs = {}
    if horizon is not None:
        spec_kwargs["horizon"] = horizon
    spec = SPEC_BY_VARIANT[variant](**spec_kwargs)
    plan = RunPlan(
        env_spec=spec,
        agent_kind=agent_kind,
        agent_params=merged,
        n_trials=trials if trials is not None else cfg.get("trials", 300),
        trials_per_subject=trials_per_subject or cfg.get("trials_per_subject"),
        master_seed=seed if seed is not None else cfg.get("seed", 0),
        agent_label=label or cfg.get("label"),
    )
    dataset = run(plan)
    export_dataset(dataset, out)
    emit(
        {
            "out": str(out),
            "agent": plan.label,
            "n_trajectories": len(dataset.trajectories),
            "n_subjects": len(dataset.subject_ids()),
            "completion_rate": dataset.meta.get("completion_rate"),
        }
    )


@main.command("sweep")
@click.option("--kind", type=click.Choice(["eps", "ucb-c"]), required=True)
@click.option("--trials", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--horizon", default=300, show_default=True)
@click.option("--fit/--no-fit", "do_fit", default=True, show_default=True,
              help="fit the full softmax model to every grid cell")
@click.option("--chains", default=4, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--warmup", default=500, show_default=True)
@click.option("--out-dir", type=click.Path(path_type=Path), default=None)
@click.option("--plot", "plot_path", type=click.Path(path_type=Path), default=None)
@friendly
def sweep_cmd(kind, trials, seed, horizon, do_fit, chains, iters, warmup,
              out_dir, plot_path) -> None:
    """Grid an algorithmic agent and recover what the fitted model sees."""
    if kind == "eps":
        datasets = sweep_eps(n_trials=trials, master_seed=seed, horizon=horizon)
        xlabel = "epsilon"
    else:
        datasets = sweep_ucb_c(n_trials=trials, master_seed=seed, horizon=horizon)
        xlabel = "confidence width c"
    rows = []
    for value, ds in datasets.items():
        row: dict = {xlabel: value, "label": ds.agent_label}
        if do_fit:
            post = fit_hier("sm3", ds, chains=chains, iters=iters, warmup=warmup, seed=seed)
            row["posterior"] = {
                k: {"mean": s["mean"], "ci90": list(s["ci90"])}
                for k, s in post.diagnostics.items()
                if k.startswith("mu[")
            }
            row["converged"] = post.converged
            if out_dir is not None:
                out_dir.mkdir(parents=True, exist_ok=True)
                (out_dir / f"fit_{ds.agent_label.replace('=', '_')}.json").write_text(
                    json.dumps(post.to_dict(), indent=2)
                )
        rows.append(row)
    if plot_path is not None and do_fit:
        from .plotting import plot_group_means

        xs = [r[xlabel] for r in rows]
        names = sorted(rows[0]["posterior"])
        stats = {n: [r["posterior"][n] for r in rows] for n in names}
        plot_group_means(xs, stats, plot_path, xlabel=xlabel)
    emit({"kind": kind, "trials": trials, "seed": seed, "rows": rows})


@main.command("fit")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", type=click.Choice(["sm1", "sm2", "sm3", "probit"]), required=True)
@click.option("--method", type=click.Choice(["mcmc", "map"]), default="mcmc", show_default=True)
@click.option("--chains", default=4, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--warmup", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--draws", "draws_path", type=click.Path(path_type=Path), default=None,
              help="save raw posterior draws as .npz")
@friendly
def fit_cmd(data: Path, model, method, chains, iters, warmup, seed, draws_path) -> None:
    """Hierarchical fit of a choice model to a dataset."""
    dataset = import_dataset(data)
    if method == "map":
        res = map_fit(model, dataset, seed=seed)
        emit(
            {
                "method": "map",
                "model": model,
                "param_names": res["param_names"],
                "mu": [float(v) for v in res["mu"]],
                "sigma": [float(v) for v in res["sigma"]],
                "target": res["target"],
                "sweeps": res["sweeps"],
            }
        )
        return
    post = fit_hier(model, dataset, chains=chains, iters=iters, warmup=warmup, seed=seed)
    if draws_path is not None:
        np.savez_compressed(
            draws_path,
            mu=post.mu,
            sigma=post.sigma,
            subj=post.subj,
            subj_loglik=post.subj_loglik,
            param_names=np.array(post.param_names),
        )
    emit(post.to_dict())


@main.command("loo")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--models", default="sm1,sm2,sm3", show_default=True)
@click.option("--chains", default=4, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--warmup", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
@friendly
def loo_cmd(data: Path, models, chains, iters, warmup, seed) -> None:
    """Fit several models and rank them by leave-one-subject-out density."""
    dataset = import_dataset(data)
    reports = []
    for model in [m.strip() for m in models.split(",") if m.strip()]:
        post = fit_hier(model, dataset, chains=chains, iters=iters, warmup=warmup, seed=seed)
        reports.append(psis_loo(post))
    emit({"data": str(data), "ranking": compare(reports)})


@main.command("qcare")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@friendly
def qcare_cmd(data: Path) -> None:
    """Per-subject exploration-exponent estimates on two-armed data."""
    emit(fit_qcare(import_dataset(data)).to_dict())


@main.command("recover")
@click.option("--preset", type=click.Choice(list(RECOVERY_PRESETS)),
              default="sm3-restless4", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--chains", default=4, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--warmup", default=500, show_default=True)
@click.option("--subjects", type=int, default=None, help="override population size")
@friendly
def recover_cmd(preset, seed, chains, iters, warmup, subjects) -> None:
    """Simulate from known population truths, refit, and score recovery."""
    emit(
        run_recovery(
            preset,
            seed=seed,
            chains=chains,
            iters=iters,
            warmup=warmup,
            n_subjects=subjects,
        )
    )


@main.command("metrics")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--windows", default=None, help="comma-separated round counts")
@click.option("--curves-csv", type=click.Path(path_type=Path), default=None)
@click.option("--exploitation-csv", type=click.Path(path_type=Path), default=None)
@friendly
def metrics_cmd(data: Path, windows, curves_csv, exploitation_csv) -> None:
    """Model-free readouts: cumulative regret and exploitation rate."""
    dataset = import_dataset(data)
    win = tuple(int(w) for w in windows.split(",")) if windows else None
    if dataset.env_spec.variant is Variant.STATIONARY2:
        curve = bayes_regret(dataset)
        regret_kind = "bayes"
    else:
        curve = realized_regret(dataset, default_groups(dataset.env_spec))
        regret_kind = "realized"
    expl = exploitation_rate(dataset, windows=win)
    if curves_csv is not None:
        curves_to_csv({dataset.agent_label: curve}, curves_csv)
    if exploitation_csv is not None:
        exploitation_to_csv({dataset.agent_label: expl}, exploitation_csv)
    emit(
        {
            "agent": dataset.agent_label,
            "n_trials": curve.n_trials,
            "regret_kind": regret_kind,
            "final_regret_mean": curve.final(),
            "final_regret_se": float(curve.se[-1]),
            "exploitation_overall": expl.overall,
            "exploitation_windows": {str(k): v for k, v in sorted(expl.windows.items())},
        }
    )


@main.command("ident")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", type=click.Choice(["sm1", "sm2", "sm3", "probit"]), required=True)
@friendly
def ident_cmd(data: Path, model) -> None:
    """Rank-check the per-subject design implied by a dataset and model."""
    dataset = import_dataset(data)
    rep = dataset_ident_report(model, dataset)
    emit(
        {
            "model": model,
            "identifiable": rep["identifiable"],
            "rank_deficient_subjects": rep["rank_deficient_subjects"],
            "n_subjects": len(rep["per_subject"]),
        }
    )


@main.command("import")
@click.option("--csv", "csv_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--mapping", type=click.Path(exists=True, path_type=Path), required=True,
              help="YAML describing columns and the environment")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@friendly
def import_cmd(csv_path: Path, mapping: Path, out: Path) -> None:
    """Convert tabular human data into the dataset format."""
    dataset = import_human_csv(csv_path, load_config(mapping))
    export_dataset(dataset, out)
    emit(
        {
            "out": str(out),
            "n_trajectories": len(dataset.trajectories),
            "n_subjects": len(dataset.subject_ids()),
        }
    )


@main.command("llm-run")
@click.option("--variant", type=click.Choice(list(SPEC_BY_VARIANT)), required=True)
@click.option("--base-url", required=True)
@click.option("--model", required=True)
@click.option("--api-key-env", default="BANDITLAB_API_KEY", show_default=True)
@click.option("--instruction", type=click.Choice(["think", "terse"]), default="terse",
              show_default=True)
@click.option("--trials", type=int, default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-retries", default=3, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--exchanges", "exchanges_path", type=click.Path(path_type=Path), default=None)
@friendly
def llm_run_cmd(variant, base_url, model, api_key_env, instruction, trials, seed,
                max_retries, out: Path, exchanges_path) -> None:
    """Play sessions against a chat-completion endpoint."""
    import os

    from .llmagent import LlmConfig, run_llm

    cfg = LlmConfig(
        base_url=base_url,
        model=model,
        api_key=os.environ.get(api_key_env),
        instruction=instruction,
        max_retries=max_retries,
    )
    spec = SPEC_BY_VARIANT[variant]()
    dataset, exchanges = run_llm(spec, cfg, n_trials=trials, master_seed=seed)
    export_dataset(dataset, out)
    if exchanges_path is not None:
        with open(exchanges_path, "w", encoding="utf-8") as fh:
            for ex in exchanges:
                fh.write(json.dumps(ex.to_dict()) + "\n")
    emit(
        {
            "out": str(out),
            "model": model,
            "n_trajectories": len(dataset.trajectories),
            "completion_rate": dataset.meta.get("completion_rate"),
            "n_exchanges": len(exchanges),
        }
    )


@main.command("serve")
@click.option("--data-dir", type=click.Path(path_type=Path), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8042, show_default=True)
@click.option("--token", default=None, help="require this bearer token on every call")
@click.option("--static", "static_dir", type=click.Path(path_type=Path), default=None,
              help="directory with a built web UI to serve at /")
@friendly
def serve_cmd(data_dir: Path, host: str, port: int, token, static_dir) -> None:
    """Run the live session service."""
    import uvicorn

    from .session import create_app

    app = create_app(data_dir, token=token, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("plot")
@click.option("--data", "data_paths", type=click.Path(exists=True, path_type=Path),
              multiple=True, required=True)
@click.option("--kind", type=click.Choice(["regret", "exploitation"]), default="regret",
              show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@friendly
def plot_cmd(data_paths, kind, out: Path) -> None:
    """Figure from one or more datasets."""
    from .plotting import plot_exploitation, plot_regret

    datasets = [import_dataset(p) for p in data_paths]
    if kind == "regret":
        curves = {}
        for ds in datasets:
            if ds.env_spec.variant is Variant.STATIONARY2:
                curves[ds.agent_label] = bayes_regret(ds)
            else:
                curves[ds.agent_label] = realized_regret(ds, default_groups(ds.env_spec))
        path = plot_regret(curves, out)
    else:
        reports = {ds.agent_label: exploitation_rate(ds) for ds in datasets}
        path = plot_exploitation(reports, out)
    emit({"out": str(path), "kind": kind, "datasets": [str(p) for p in data_paths]})


if __name__ == "__main__":
    sys.exit(main())
