"""Command-line pipeline: ingest, fit, estimate, plan, simulate, report.

Commands: fit-qfr, estimate-chain, plan, simulate, compare, export-plot-data.
All take --config (YAML, see config.py), plus --seed and --out overrides.
Every command is deterministic given identical config and seed.
"""

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import controllers as ctl
from . import ingest, mdp, qfr, regimes, sim
from .config import ConfigError, RunConfig
from .thermal import capacitance

REGIME_MODEL_FILE = "regime_model.json"
TRANSITION_MODEL_FILE = "transition_model.json"
POLICY_FILE = "policy.json"
REPORTS_FILE = "reports.json"


class PipelineError(RuntimeError):
    """A command's inputs are missing or inconsistent."""


def _out_dir(cfg: RunConfig, args) -> str:
    out = args.out or cfg.path("out_dir")
    os.makedirs(out, exist_ok=True)
    return out


def _load_price(cfg: RunConfig) -> ingest.TimeSeries:
    return ingest.load_series(cfg.require_path("price_csv"), ingest.SeriesKind.PRICE)


def _load_temperature(cfg: RunConfig) -> ingest.TimeSeries:
    return ingest.load_series(cfg.require_path("temperature_csv"),
                              ingest.SeriesKind.TEMPERATURE)


def _window_bounds(window):
    start, end = window
    h0 = ingest.parse_timestamp(start) if isinstance(start, str) else int(start)
    h1 = ingest.parse_timestamp(end) if isinstance(end, str) else int(end)
    return h0, h1


def _workload_series(cfg: RunConfig, window) -> ingest.TimeSeries:
    path = cfg.path("workload_csv")
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"paths.workload_csv: file not found: {path}")
        return ingest.slice_series(
            ingest.load_series(path, ingest.SeriesKind.WORKLOAD), window)
    h = cfg.raw["heat_load"]
    h0, h1 = _window_bounds(window)
    return ingest.synth_workload(cfg.seed, h1 - h0 + 1, h["synth_base_cores"],
                                 h["synth_amplitude"], start=h0,
                                 noise=h["synth_noise"])


def _train_windows(cfg: RunConfig):
    windows = cfg.raw["windows"]["train"]
    if not windows:
        raise PipelineError("config defines no windows.train")
    starts = [ingest.parse_timestamp(w[0]) for w in windows]
    order = np.argsort(starts)
    out = [windows[i] for i in order]
    for (a, b) in zip(out, out[1:]):
        if ingest.parse_timestamp(b[0]) <= ingest.parse_timestamp(a[1]):
            raise PipelineError("windows.train must not overlap")
    return out


def _simulate_windows(cfg: RunConfig):
    windows = cfg.raw["windows"]["simulate"]
    if not windows:
        raise PipelineError("config defines no windows.simulate")
    return windows


def _train_samples(cfg: RunConfig, price: ingest.TimeSeries):
    hours, values = [], []
    for window in _train_windows(cfg):
        part = ingest.slice_series(price, window)
        hours.append(part.hours)
        values.append(part.values)
    return np.concatenate(hours), np.concatenate(values)


def _planning_day_hour(cfg: RunConfig) -> int:
    """Start hour of the planning day (midnight UTC)."""
    day = cfg.raw["mdp"]["planning_day"]
    if day is not None:
        return ingest.parse_timestamp(f"{day}T00:00:00Z")
    windows = cfg.raw["windows"]["simulate"]
    if not windows:
        raise PipelineError(
            "mdp.planning_day is not set and there is no simulate window "
            "to derive it from")
    start = ingest.parse_timestamp(windows[0][0])
    year = datetime.fromtimestamp(start * 3600, tz=timezone.utc).year
    derived = ingest.parse_timestamp(f"{year}-07-15T00:00:00Z")
    end = ingest.parse_timestamp(windows[0][1])
    if not start <= derived <= end - 23:
        raise PipelineError(
            "derived planning day July 15 is outside the first simulate "
            "window; set mdp.planning_day explicitly")
    return derived


def _assemble_problem(cfg: RunConfig, regime_model, transition_model):
    """Planning problem over the configured cycle (one day or a window)."""
    if regime_model.m != cfg.space.m:
        raise PipelineError(
            f"regime model has {regime_model.m} regimes but config expects "
            f"{cfg.space.m}; refit or change qfr.regimes")
    if transition_model.m != regime_model.m:
        raise PipelineError("transition model and regime model disagree on M")

    if cfg.raw["mdp"]["planning_cycle"] == "day":
        start = _planning_day_hour(cfg)
        window = (start, start + 23)
    else:
        window = _simulate_windows(cfg)[0]
    temp = ingest.slice_series(_load_temperature(cfg), window)
    work = _workload_series(cfg, window)
    hours = temp.hours
    q_cycle = cfg.heat.q_base + cfg.heat.phi * work.values
    prices = qfr.price_table(regime_model, hours)
    trans = np.stack([regimes.matrix_at(transition_model, int(h)) for h in hours])
    return mdp.MdpProblem(space=cfg.space, cost=cfg.planning_cost,
                          chiller=cfg.chiller, t_out=temp.values, q=q_cycle,
                          prices=prices, trans=trans,
                          gamma_env=cfg.facility.gamma_env,
                          c_heat=capacitance(cfg.facility), hours=hours)


def _build_controllers(cfg: RunConfig, out, args, need_policy=True):
    built = {}
    facility = cfg.facility
    c_heat = capacitance(facility)
    fr = cfg.raw["fixed_rule"]
    for name in cfg.raw["controllers"]:
        if name == "greedy":
            built[name] = ctl.GreedyController(cfg.chiller, cfg.cost,
                                               facility.gamma_env, c_heat)
        elif name == "fixed-rule":
            built[name] = ctl.FixedRuleController(
                cfg.chiller, cfg.cost, facility.gamma_env, c_heat,
                peak_start=fr["peak_start"], peak_end=fr["peak_end"],
                precool_start=fr["precool_start"], precool_end=fr["precool_end"])
        elif name == "qfr-mdp":
            if not need_policy:
                continue
            policy = mdp.load_policy(_input_path(args, "policy", out, POLICY_FILE))
            model = qfr.load_model(_input_path(args, "regime_model", out,
                                               REGIME_MODEL_FILE))
            built[name] = ctl.QfrMdpController(
                policy=policy, regime_model=model,
                argmax=bool(cfg.raw["simulation"]["argmax_policy"]))
    return built


def _input_path(args, flag, out, default_name):
    override = getattr(args, flag.replace("-", "_"), None)
    path = override or os.path.join(out, default_name)
    if not os.path.exists(path):
        raise PipelineError(
            f"required input {path} not found; run the earlier pipeline "
            f"stage or pass --{flag.replace('_', '-')}")
    return path


def cmd_fit_qfr(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    price = _load_price(cfg)
    hours, values = _train_samples(cfg, price)
    model = qfr.fit_regimes(hours, values, cfg.raw["qfr"]["regimes"], cfg.design)
    qfr.save_model(model, os.path.join(out, REGIME_MODEL_FILE))

    first = _train_windows(cfg)[0]
    table_hours = ingest.slice_series(price, first).hours
    bounds, reps = model.surfaces_at(table_hours)
    with open(os.path.join(out, "qfr_surfaces.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "hour_of_day"]
                        + [f"boundary_{j}" for j in range(1, model.m)]
                        + [f"representative_{p}" for p in range(1, model.m + 1)])
        for i, h in enumerate(table_hours):
            writer.writerow([ingest.format_timestamp(h), int(h % 24)]
                            + [repr(float(v)) for v in bounds[i]]
                            + [repr(float(v)) for v in reps[i]])
    print(f"fitted {model.m}-regime model on {len(values)} prices: "
          f"{len(model.boundary_fits)} boundary fits, "
          f"{len(model.representative_fits)} representative fits")
    return 0


def cmd_estimate_chain(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    model = qfr.load_model(_input_path(args, "regime_model", out, REGIME_MODEL_FILE))
    price = _load_price(cfg)
    hours, values = _train_samples(cfg, price)
    labels = qfr.classify_series(model, hours, values)
    chain = regimes.estimate(zip(hours, labels), m=model.m,
                             alpha=cfg.raw["chain"]["alpha"],
                             grouping=cfg.raw["chain"]["grouping"])
    regimes.save_model(chain, os.path.join(out, TRANSITION_MODEL_FILE))
    print(f"estimated {len(chain.matrices)} transition matrices "
          f"(grouping={chain.grouping}, alpha={chain.alpha})")
    return 0


def cmd_plan(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    model = qfr.load_model(_input_path(args, "regime_model", out, REGIME_MODEL_FILE))
    chain = regimes.load_model(_input_path(args, "transition_model", out,
                                           TRANSITION_MODEL_FILE))
    problem = _assemble_problem(cfg, model, chain)
    occupancy = mdp.solve_occupancy(mdp.build_lp(problem))
    mdp.check_occupancy(problem, occupancy)
    policy = mdp.extract_policy(problem, occupancy)
    mdp.save_policy(policy, os.path.join(out, POLICY_FILE))
    print(f"planned cycle n={problem.n} states={problem.space.n_theta}x"
          f"{problem.space.m} actions={problem.space.n_actions}")
    print(f"objective: {occupancy.objective:.6f} $/step")
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    need_policy = "qfr-mdp" in cfg.raw["controllers"]
    built = _build_controllers(cfg, out, args, need_policy=need_policy)
    if not built:
        raise PipelineError("config selects no controllers")

    labeling_model = None
    model_path = os.path.join(out, REGIME_MODEL_FILE)
    if getattr(args, "regime_model", None) or os.path.exists(model_path):
        labeling_model = qfr.load_model(getattr(args, "regime_model", None)
                                        or model_path)
    specs = sim.SimSpecs(facility=cfg.facility, chiller=cfg.chiller,
                         heat=cfg.heat, cost=cfg.cost,
                         regime_model=labeling_model, space=cfg.space)

    price = _load_price(cfg)
    temperature = _load_temperature(cfg)
    reports = []
    for w_idx, window in enumerate(_simulate_windows(cfg)):
        workload = _workload_series(cfg, window)
        dataset = ingest.align(price, temperature, workload, window)
        for c_idx, (name, controller) in enumerate(sorted(built.items())):
            trajectory = sim.rollout(controller, dataset, specs,
                                     initial_theta=cfg.initial_theta,
                                     seed=[cfg.seed, w_idx, c_idx])
            day = ingest.format_timestamp(dataset.hours[0])[:10]
            trajectory.to_csv(os.path.join(out, f"trajectory_{name}_{day}.csv"))
            report = sim.summarize(trajectory)
            reports.append(report)
            print(f"{report.window} {name}: ${report.total_energy_cost:,.2f} "
                  f"({report.total_violation_degree_hours:.3f} degree-hours "
                  f"outside band)")
    with open(os.path.join(out, REPORTS_FILE), "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=1, sort_keys=True)
        fh.write("\n")
    return 0


def _load_reports(path):
    with open(path, encoding="utf-8") as fh:
        docs = json.load(fh)
    return [sim.CostReport(**doc) for doc in docs]


def cmd_compare(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    reports = _load_reports(_input_path(args, "reports", out, REPORTS_FILE))
    table = sim.compare(reports, args.baseline)
    table.to_csv(os.path.join(out, "comparison.csv"))
    with open(os.path.join(out, "comparison.json"), "w", encoding="utf-8") as fh:
        json.dump(table.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    for row in table.rows:
        print(f"{row['window']} {row['controller']}: "
              f"${row['total_energy_cost']:,.2f} "
              f"({row['improvement_vs_baseline']:+.2%} vs {args.baseline})")
    return 0


def cmd_export_plot_data(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    model = qfr.load_model(_input_path(args, "regime_model", out, REGIME_MODEL_FILE))
    policy = mdp.load_policy(_input_path(args, "policy", out, POLICY_FILE))
    reports = _load_reports(_input_path(args, "reports", out, REPORTS_FILE))
    if not reports:
        raise PipelineError("reports file is empty; run simulate first")

    # price-model surfaces over the first training window
    price = _load_price(cfg)
    first = _train_windows(cfg)[0]
    hours = ingest.slice_series(price, first).hours
    bounds, reps = model.surfaces_at(hours)
    with open(os.path.join(out, "fig1_quantile_surfaces.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "hour_of_day"]
                        + [f"boundary_{j}" for j in range(1, model.m)]
                        + [f"representative_{p}" for p in range(1, model.m + 1)])
        for i, h in enumerate(hours):
            writer.writerow([ingest.format_timestamp(h), int(h % 24)]
                            + [repr(float(v)) for v in bounds[i]]
                            + [repr(float(v)) for v in reps[i]])

    # planned actions for the chosen day: hour x theta x regime
    day_start = _planning_day_hour(cfg)
    expected = policy.expected_actions()
    grid = policy.space.theta_grid
    with open(os.path.join(out, "fig2_policy_day.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour_of_day", "theta", "regime",
                         "expected_action", "argmax_action"])
        for hod in range(24):
            slot = ctl.policy_slot(policy, day_start + hod)
            for i, theta in enumerate(grid):
                for p in range(policy.space.m):
                    writer.writerow([
                        hod, repr(float(theta)), p + 1,
                        repr(float(expected[slot, i, p])),
                        int(policy.probabilities[slot, i, p].argmax()),
                    ])

    # one day of simulated temperature traces per controller
    sim_windows = _simulate_windows(cfg)
    first_sim = sim_windows[0]
    day = args.day or ingest.format_timestamp(day_start)[:10]
    day_h0 = ingest.parse_timestamp(f"{day}T00:00:00Z")
    window_day = ingest.format_timestamp(
        ingest.parse_timestamp(first_sim[0]))[:10]
    rows_out = []
    for name in sorted(cfg.raw["controllers"]):
        path = os.path.join(out, f"trajectory_{name}_{window_day}.csv")
        if not os.path.exists(path):
            raise PipelineError(f"missing {path}; run simulate first")
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                h = ingest.parse_timestamp(row["timestamp"])
                if day_h0 <= h < day_h0 + 24:
                    rows_out.append([name, row["timestamp"], row["theta"],
                                     row["action"], row["price"]])
    if not rows_out:
        raise PipelineError(
            f"day {day} not inside the first simulate window {first_sim}")
    with open(os.path.join(out, "fig3_day_traces.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["controller", "timestamp", "theta", "action", "price"])
        writer.writerows(rows_out)

    # multi-window cost comparison
    table = sim.compare(reports, args.baseline)
    table.to_csv(os.path.join(out, "fig4_cost_comparison.csv"))
    print("wrote fig1_quantile_surfaces.csv, fig2_policy_day.csv, "
          "fig3_day_traces.csv, fig4_cost_comparison.csv")
    return 0


COMMANDS = {
    "fit-qfr": cmd_fit_qfr,
    "estimate-chain": cmd_estimate_chain,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "export-plot-data": cmd_export_plot_data,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coolsched",
        description="Electricity price-aware data center cooling scheduler")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")
        if name in ("estimate-chain", "plan", "simulate", "export-plot-data"):
            p.add_argument("--regime-model", default=None)
        if name == "plan":
            p.add_argument("--transition-model", default=None)
        if name == "simulate":
            p.add_argument("--policy", default=None)
        if name in ("compare", "export-plot-data"):
            p.add_argument("--reports", default=None)
            p.add_argument("--baseline", default="greedy")
        if name == "export-plot-data":
            p.add_argument("--policy", default=None)
            p.add_argument("--day", default=None,
                           help="YYYY-MM-DD day for the trace export")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
        if args.seed is not None:
            cfg.raw["seed"] = args.seed
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, PipelineError, ingest.IngestError, qfr.FitError,
            regimes.EstimationError, regimes.BucketError, mdp.SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
