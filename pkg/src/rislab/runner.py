# Experiment orchestration: multi-seed training runs, CSV emission,
# aggregation with t-based confidence intervals, learning-curve plots and
# the CLI.

import argparse
import concurrent.futures
import csv
import hashlib
import os
import sys
import time
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy import stats

from .environment import (DownlinkEnv, SystemConfig, load_channels,
                          save_channels)
from .explorer import BetaExplorer, LambdaSchedule
from .neural import load_mlp, save_mlp
from .numerics import make_rng, spawn_rngs
from .oracle import (GridSpec, brute_force_phases, matched_filter_beamformer,
                     random_search, reference_sum_rate)
from .sac import AgentHyperParams, SacAgent, TrainRecord, train_loop

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "AggregateSummary",
    "ScenarioStat",
    "parse_config_file",
    "setting_hash",
    "run_single",
    "run_experiment",
    "tail_mean",
    "aggregate",
    "smooth",
    "emit_plot",
    "read_run_csv",
    "main",
]

RUNNER_SCENARIOS = ("golden", "mismatch", "beta_space")
CSV_HEADER = ["step", "true_sum_rate", "training_reward", "lambda", "alpha"]


@dataclass
class ExperimentConfig:
    """Flat experiment description; defaults mirror the tuned hyper-parameter
    table (training) and environment constants."""

    # environment
    k: int = 4
    m: int = 4
    l: int = 16
    pt_dbm: float = 30.0
    sigma_w2: float = 1e-2
    sigma_e2: float = 1e-2
    beta_min: float = 0.3
    mu: float = 0.0
    kappa: float = 1.5
    log_base: float = 2.0
    # training
    scenario: str = "beta_space"
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    steps: int = 20000
    hidden_layers: int = 2
    hidden_units: int = 256
    learning_rate: float = 1e-3
    tau: float = 1e-3
    batch_size: int = 16
    buffer_capacity: int = 20000
    init_alpha: float = 0.2
    tuner_lr: float = 1e-2
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    log_std_offset: float = -2.5
    squash_eps: float = 1e-6
    lambda0: float = 0.3
    perturb_mode: str = "blended"   # blended | literal
    beta_lo_mode: str = "beta_min"  # beta_min | zero
    # harness
    outdir: str = "runs"
    powers: tuple = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    smooth_window: int = 25
    workers: int = 0  # 0 -> one per seed, capped by the CPU count

    def __post_init__(self):
        if self.scenario not in RUNNER_SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.perturb_mode not in ("blended", "literal"):
            raise ValueError(f"unknown perturb mode {self.perturb_mode!r}")
        if self.beta_lo_mode not in ("beta_min", "zero"):
            raise ValueError(f"unknown beta_lo mode {self.beta_lo_mode!r}")

    def system_config(self) -> SystemConfig:
        return SystemConfig(
            k=self.k, m=self.m, l=self.l, pt_dbm=self.pt_dbm,
            sigma_w2=self.sigma_w2, sigma_e2=self.sigma_e2,
            beta_min=self.beta_min, mu=self.mu, kappa=self.kappa,
            scenario="golden" if self.scenario == "golden" else "mismatch",
            log_base=self.log_base)

    def hyper_params(self) -> AgentHyperParams:
        return AgentHyperParams(
            hidden=self.hidden_units, lr=self.learning_rate, tau=self.tau,
            batch_size=self.batch_size, buffer_capacity=self.buffer_capacity,
            init_alpha=self.init_alpha, tuner_lr=self.tuner_lr,
            log_std_bounds=(self.log_std_min, self.log_std_max),
            log_std_offset=self.log_std_offset, squash_eps=self.squash_eps)

    def beta_lo(self) -> float:
        return self.beta_min if self.beta_lo_mode == "beta_min" else 0.0


_SETTING_FIELDS = (
    "k", "m", "l", "pt_dbm", "sigma_w2", "sigma_e2", "beta_min", "mu",
    "kappa", "log_base", "scenario", "steps", "hidden_layers",
    "hidden_units", "learning_rate", "tau", "batch_size", "buffer_capacity",
    "init_alpha", "tuner_lr", "log_std_min", "log_std_max",
    "log_std_offset", "squash_eps", "lambda0", "perturb_mode",
    "beta_lo_mode",
)


def setting_hash(cfg: ExperimentConfig) -> str:
    """Stable 8-hex digest of the setting-defining fields (seeds excluded)."""
    text = "|".join(f"{name}={getattr(cfg, name)!r}"
                    for name in _SETTING_FIELDS)
    return hashlib.sha1(text.encode()).hexdigest()[:8]


def parse_config_file(path) -> dict:
    """Flat `key = value` text; blank lines and # comments ignored."""
    values = {}
    valid = {f.name for f in fields(ExperimentConfig)}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in valid:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, value.strip())
    return values


def _coerce(key: str, text: str):
    blank = ExperimentConfig(seeds=(0,))
    current = getattr(blank, key)
    if key in ("seeds",):
        return tuple(int(v) for v in text.split(",") if v.strip())
    if key in ("powers",):
        return tuple(float(v) for v in text.split(",") if v.strip())
    if isinstance(current, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        if key == "log_base" and text.strip().lower() == "e":
            return float(np.e)
        return float(text)
    return text


@dataclass
class RunRecord:
    """One seed's training trace plus bookkeeping."""

    scenario: str
    seed: int
    record: TrainRecord
    wall_clock: float
    config_echo: dict = field(default_factory=dict)
    csv_path: str | None = None

    @property
    def true_sum_rate(self) -> np.ndarray:
        return self.record.true_sum_rate


def _csv_name(cfg: ExperimentConfig, seed: int) -> str:
    return f"{cfg.scenario}_{setting_hash(cfg)}_{seed}.csv"


def write_run_csv(path, record: TrainRecord) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for t in range(len(record)):
            # repr of a Python float is the shortest exact round-trip form
            writer.writerow([t, repr(float(record.true_sum_rate[t])),
                             repr(float(record.training_reward[t])),
                             repr(float(record.lam[t])),
                             repr(float(record.alpha[t]))])


def read_run_csv(path) -> TrainRecord:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header}")
        rows = [(float(r[1]), float(r[2]), float(r[3]), float(r[4]))
                for r in reader]
    cols = [np.array(c) for c in zip(*rows)]
    return TrainRecord(*cols)


def run_single(cfg: ExperimentConfig, seed: int, channels=None,
               load_nets_dir=None) -> RunRecord:
    """Train one seed of one scenario and persist its CSV."""
    sys_cfg = cfg.system_config()
    rng_channels, rng_actor, rng_c1, rng_c2, rng_expl, rng_act, rng_upd = \
        spawn_rngs(seed, 7)
    env = DownlinkEnv(sys_cfg, rng_channels, channels=channels)
    if cfg.hidden_layers != 2:
        raise ValueError("the agent networks use exactly two hidden layers")
    agent = SacAgent(sys_cfg.state_dim, sys_cfg.action_dim,
                     cfg.hyper_params(), (rng_actor, rng_c1, rng_c2),
                     rng_act, rng_upd, n_varying=env.varying_state_dims)
    explorer = schedule = None
    if cfg.scenario == "beta_space":
        explorer = BetaExplorer(sys_cfg.state_dim, 2 * cfg.m * cfg.k, cfg.l,
                                cfg.hidden_units, rng_expl, cfg.beta_lo(),
                                cfg.perturb_mode, cfg.learning_rate,
                                n_varying=env.varying_state_dims)
        schedule = LambdaSchedule(cfg.lambda0, cfg.steps)
    if load_nets_dir is not None:
        _load_agent_nets(load_nets_dir, agent, explorer)
    start = time.perf_counter()
    record = train_loop(env, agent, cfg.steps, explorer, schedule)
    wall = time.perf_counter() - start
    os.makedirs(cfg.outdir, exist_ok=True)
    path = os.path.join(cfg.outdir, _csv_name(cfg, seed))
    write_run_csv(path, record)
    echo = {name: getattr(cfg, name) for name in _SETTING_FIELDS}
    run = RunRecord(cfg.scenario, seed, record, wall, echo, path)
    run._env = env          # kept for channel dumps and oracle comparisons
    run._agent = agent
    run._explorer = explorer
    return run


def _run_single_task(cfg: ExperimentConfig, seed: int) -> RunRecord:
    run = run_single(cfg, seed)
    run._env = run._agent = run._explorer = None  # don't pickle live state
    return run


def run_experiment(cfg: ExperimentConfig) -> list:
    """All seeds of one scenario; seeds run in parallel when cores allow."""
    workers = cfg.workers or min(len(cfg.seeds), os.cpu_count() or 1)
    workers = min(workers, len(cfg.seeds))
    if workers <= 1:
        return [run_single(cfg, seed) for seed in cfg.seeds]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_single_task, cfg, seed)
                   for seed in cfg.seeds]
        return [f.result() for f in futures]


def _load_agent_nets(directory, agent: SacAgent, explorer) -> None:
    agent.policy.net.params[...] = load_mlp(
        os.path.join(directory, "actor.npz")).params
    agent.critic1.params[...] = load_mlp(
        os.path.join(directory, "critic1.npz")).params
    agent.critic2.params[...] = load_mlp(
        os.path.join(directory, "critic2.npz")).params
    agent.target1 = agent.critic1.copy()
    agent.target2 = agent.critic2.copy()
    if explorer is not None:
        path = os.path.join(directory, "explorer.npz")
        if os.path.exists(path):
            explorer.net.params[...] = load_mlp(path).params
            explorer.target_net = explorer.net.copy()


def _save_agent_nets(directory, agent: SacAgent, explorer) -> None:
    os.makedirs(directory, exist_ok=True)
    save_mlp(os.path.join(directory, "actor.npz"), agent.policy.net)
    save_mlp(os.path.join(directory, "critic1.npz"), agent.critic1)
    save_mlp(os.path.join(directory, "critic2.npz"), agent.critic2)
    if explorer is not None:
        save_mlp(os.path.join(directory, "explorer.npz"), explorer.net)


# -- aggregation ------------------------------------------------------------

def tail_mean(values: np.ndarray, tail: int = 1000) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size < tail:
        warnings.warn(f"record holds {values.size} < {tail} steps; "
                      "averaging the whole record")
        tail = values.size
    return float(values[-tail:].mean())


@dataclass
class ScenarioStat:
    mean: float
    ci_half_width: float
    n_runs: int
    seed_means: tuple


@dataclass
class AggregateSummary:
    """Across-seed statistics of the final-window diagnostic rate."""

    stats: dict
    performance_increase: float | None = None

    def table(self) -> str:
        lines = [f"{'scenario':<12} {'mean':>8} {'ci95':>8} {'runs':>5}"]
        for name, st in self.stats.items():
            lines.append(f"{name:<12} {st.mean:8.3f} "
                         f"{st.ci_half_width:8.3f} {st.n_runs:5d}")
        if self.performance_increase is not None:
            lines.append(f"performance increase: "
                         f"{self.performance_increase:.1f}%")
        return "\n".join(lines)


def aggregate(records: list, tail: int = 1000) -> AggregateSummary:
    """Last-`tail` means per seed, then across-seed mean and 95% Student-t
    interval per scenario; performance increase relates the explorer's gain
    to the golden-mismatch gap."""
    if len(records) < 2:
        raise ValueError("aggregation needs at least two run records")
    by_scenario: dict = {}
    for run in records:
        by_scenario.setdefault(run.scenario, []).append(run)
    stats_out = {}
    for name, runs in by_scenario.items():
        means = np.array([tail_mean(r.true_sum_rate, tail) for r in runs])
        n = means.size
        if n < 2:
            raise ValueError(
                f"scenario {name!r} has {n} run(s); >= 2 needed for a CI")
        half = float(stats.t.ppf(0.975, n - 1)
                     * means.std(ddof=1) / np.sqrt(n))
        stats_out[name] = ScenarioStat(float(means.mean()), half, n,
                                       tuple(means))
    increase = None
    if {"golden", "mismatch", "beta_space"} <= stats_out.keys():
        golden = stats_out["golden"].mean
        mismatch = stats_out["mismatch"].mean
        beta = stats_out["beta_space"].mean
        if golden > mismatch:
            increase = 100.0 * (beta - mismatch) / (golden - mismatch)
    return AggregateSummary(stats_out, increase)


def smooth(values: np.ndarray, window: int = 25) -> np.ndarray:
    """Trailing moving average; the first window-1 points average whatever
    prefix is available."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    if window == 1:
        return values.copy()
    csum = np.cumsum(values)
    out = np.empty_like(values)
    head = min(window - 1, values.size)
    out[:head] = csum[:head] / np.arange(1, head + 1)
    if values.size >= window:
        out[window - 1:] = (csum[window - 1:]
                            - np.concatenate([[0.0], csum[:-window]])) / window
    return out


def emit_plot(series_by_label: dict, path, window: int = 25,
              xlabel: str = "step", ylabel: str = "sum rate") -> None:
    """Smoothed mean curves with shaded 95% t-bands across seeds, as SVG."""
    if not series_by_label:
        raise ValueError("nothing to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.2))
    length = None
    for label, series in series_by_label.items():
        series = np.atleast_2d(np.asarray(series, dtype=np.float64))
        if series.size == 0:
            raise ValueError(f"empty series for {label!r}")
        if length is None:
            length = series.shape[1]
        elif series.shape[1] != length:
            raise ValueError("all series must share a common length")
        smoothed = np.vstack([smooth(row, window) for row in series])
        mean = smoothed.mean(axis=0)
        n = smoothed.shape[0]
        if n > 1:
            half = stats.t.ppf(0.975, n - 1) * smoothed.std(axis=0, ddof=1) \
                / np.sqrt(n)
        else:
            half = np.zeros_like(mean)
        x = np.arange(length)
        ax.plot(x, mean, label=label)
        ax.fill_between(x, mean - half, mean + half, alpha=0.25)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# -- CLI ---------------------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    blank = ExperimentConfig(seeds=(0,))
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name in ("seeds",):
            parser.add_argument(flag, type=_parse_int_list,
                                default=argparse.SUPPRESS,
                                help="comma-separated seeds")
        elif f.name in ("powers",):
            parser.add_argument(flag, type=_parse_float_list,
                                default=argparse.SUPPRESS,
                                help="comma-separated powers in dBm")
        elif f.name == "log_base":
            parser.add_argument(flag, type=_parse_log_base,
                                default=argparse.SUPPRESS,
                                help="rate log base (number or 'e')")
        else:
            parser.add_argument(flag, type=type(getattr(blank, f.name)),
                                default=argparse.SUPPRESS)


def _parse_int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_log_base(text: str) -> float:
    return float(np.e) if text.strip().lower() == "e" else float(text)


def _config_from_args(args) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for f in fields(ExperimentConfig):
        if hasattr(args, f.name):
            values[f.name] = getattr(args, f.name)
    return ExperimentConfig(**values)


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    channels = load_channels(args.channels) if getattr(args, "channels", None) \
        else None
    single_flags = [args.save_channels, args.save_nets, args.load_nets]
    if any(single_flags) and len(cfg.seeds) != 1:
        raise ValueError("--save-channels/--save-nets/--load-nets need "
                         "exactly one seed")
    if any(single_flags) or channels is not None:
        runs = [run_single(cfg, cfg.seeds[0], channels=channels,
                           load_nets_dir=args.load_nets)]
    else:
        runs = run_experiment(cfg)
    for run in runs:
        print(f"{run.scenario} seed={run.seed} "
              f"last1000={tail_mean(run.true_sum_rate):.4f} "
              f"wall={run.wall_clock:.1f}s -> {run.csv_path}")
    if args.save_channels:
        save_channels(args.save_channels, runs[0]._env.channels)
    if args.save_nets:
        _save_agent_nets(args.save_nets, runs[0]._agent, runs[0]._explorer)
    return 0


def cmd_replay(args) -> int:
    cfg = _config_from_args(args)
    channels = load_channels(args.channels)
    runs = [run_single(cfg, seed, channels=channels) for seed in cfg.seeds]
    for run in runs:
        print(f"replay {run.scenario} seed={run.seed} "
              f"last1000={tail_mean(run.true_sum_rate):.4f} -> {run.csv_path}")
    return 0


def _suite_records(cfg: ExperimentConfig) -> dict:
    records = {}
    for scenario in RUNNER_SCENARIOS:
        records[scenario] = run_experiment(replace(cfg, scenario=scenario))
    return records


def cmd_suite(args) -> int:
    cfg = _config_from_args(args)
    records = _suite_records(cfg)
    summary = aggregate([r for runs in records.values() for r in runs])
    print(summary.table())
    os.makedirs(cfg.outdir, exist_ok=True)
    summary_path = os.path.join(cfg.outdir,
                                f"summary_{setting_hash(cfg)}.csv")
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "mean_last1000", "ci95_half_width",
                         "n_runs"])
        for name, st in summary.stats.items():
            writer.writerow([name, repr(st.mean), repr(st.ci_half_width),
                             st.n_runs])
        if summary.performance_increase is not None:
            writer.writerow(["performance_increase_percent",
                             repr(summary.performance_increase), "", ""])
    plot_path = os.path.join(cfg.outdir, f"curves_{setting_hash(cfg)}.svg")
    emit_plot({name: np.vstack([r.true_sum_rate for r in runs])
               for name, runs in records.items()},
              plot_path, cfg.smooth_window)
    print(f"summary -> {summary_path}\nplot -> {plot_path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    os.makedirs(cfg.outdir, exist_ok=True)
    rows = []
    for power in cfg.powers:
        pcfg = replace(cfg, pt_dbm=power)
        records = _suite_records(pcfg)
        summary = aggregate([r for runs in records.values() for r in runs])
        print(f"P_t = {power} dBm\n{summary.table()}\n")
        for name, st in summary.stats.items():
            rows.append([power, name, repr(st.mean), repr(st.ci_half_width),
                         st.n_runs])
    sweep_path = os.path.join(cfg.outdir, f"sweep_{setting_hash(cfg)}.csv")
    with open(sweep_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pt_dbm", "scenario", "mean_last1000",
                         "ci95_half_width", "n_runs"])
        writer.writerows(rows)
    print(f"sweep -> {sweep_path}")
    return 0


def cmd_oracle(args) -> int:
    """Cross-check the production rate kernel against the loop-based
    reference and verify brute-force dominance on a tiny instance."""
    from .environment import generate_channels, sum_rate
    cfg = SystemConfig(k=args.users, m=args.antennas, l=args.elements,
                       sigma_e2=0.0, beta_min=args.beta_min,
                       scenario="golden")
    rng = make_rng(args.seed)
    worst = 0.0
    for _ in range(args.instances):
        channels = generate_channels(cfg, rng)
        phases = rng.uniform(0.0, 2.0 * np.pi, cfg.l)
        phi = np.exp(1j * phases)
        g = matched_filter_beamformer(channels, phi, cfg)
        fast = sum_rate(phi, channels.cascaded, g, cfg.sigma_w2, cfg.log_base)
        ref = reference_sum_rate(phi, channels.cascaded, g, cfg.sigma_w2,
                                 cfg.log_base)
        worst = max(worst, abs(fast - ref))
    print(f"kernel agreement over {args.instances} instances: "
          f"max |diff| = {worst:.3e}")
    channels = generate_channels(cfg, rng)
    phi0 = np.ones(cfg.l, dtype=np.complex128)
    g = matched_filter_beamformer(channels, phi0, cfg)
    grid = GridSpec(args.levels, max_elements=cfg.l)
    best_phases, best_rate = brute_force_phases(cfg, channels, g, grid)
    print(f"brute force over {args.levels}^{cfg.l} grid: "
          f"best rate = {best_rate:.6f} at phases {np.round(best_phases, 4)}")
    _, floor = random_search(cfg, channels, args.instances, rng)
    print(f"random-search floor ({args.instances} draws): {floor:.6f}")
    if worst > 1e-9:
        print("error: kernels disagree beyond 1e-9", file=sys.stderr)
        return 1
    return 0


def cmd_plot(args) -> int:
    series = {}
    for path in args.csv:
        label = os.path.basename(path).rsplit(".", 1)[0]
        series[label] = read_run_csv(path).true_sum_rate[None, :]
    emit_plot(series, args.out, args.window)
    print(f"plot -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rislab",
        description="RIS-aided MU-MISO downlink training harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one scenario over seeds")
    _add_config_flags(p_train)
    p_train.add_argument("--channels", help="channel dump to adopt (.npz)")
    p_train.add_argument("--save-channels", help="dump the drawn channels")
    p_train.add_argument("--save-nets", help="directory for net checkpoints")
    p_train.add_argument("--load-nets", help="directory with net checkpoints")
    p_train.set_defaults(func=cmd_train)

    p_replay = sub.add_parser("replay", help="rerun on stored channels")
    _add_config_flags(p_replay)
    p_replay.add_argument("--channels", required=True)
    p_replay.set_defaults(func=cmd_replay)

    p_suite = sub.add_parser("suite",
                             help="golden + mismatch + beta_space, aggregated")
    _add_config_flags(p_suite)
    p_suite.set_defaults(func=cmd_suite)

    p_sweep = sub.add_parser("sweep", help="suite across transmit powers")
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="validate the rate kernels")
    p_oracle.add_argument("--users", type=int, default=2)
    p_oracle.add_argument("--antennas", type=int, default=2)
    p_oracle.add_argument("--elements", type=int, default=2)
    p_oracle.add_argument("--levels", type=int, default=16)
    p_oracle.add_argument("--beta-min", type=float, default=0.3)
    p_oracle.add_argument("--instances", type=int, default=200)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.set_defaults(func=cmd_oracle)

    p_plot = sub.add_parser("plot", help="plot stored run CSVs")
    p_plot.add_argument("csv", nargs="+")
    p_plot.add_argument("--out", default="curves.svg")
    p_plot.add_argument("--window", type=int, default=25)
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: fail with a message, not a trace
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
