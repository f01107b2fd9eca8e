"""Experiment pipeline: pools, demonstrations, models, evaluation, report.

Every artifact is a pure function of the experiment config; rerunning a
stage with the same config reproduces its files byte for byte. Wall
clock measurements go to a separate timings file so the metrics CSV
stays deterministic. Files are written atomically (write then rename)
and a stage is skipped when its artifact already exists.
"""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import json

from .environment import (ChannelParams, Hotspot, Instance, MissionConfig,
                          instance_from_dict, instance_to_dict, pool_from_dict,
                          pool_to_dict, sample_instance, sample_pool)
from .errors import ConfigurationError
from .oracle import ObjectiveWeights, Tour, make_tour, solve, tour_from_dict, tour_to_dict
from .planner import PlannerConfig, levenshtein, plan_mission, plan_to_dict
from .ql import QTable, QTrainConfig, construct_word, qtable_from_dict, qtable_to_dict, train_q
from .world_model import (NoiseConfig, Word, WorldModel, learn, model_from_dict,
                          model_to_dict, word_from_tour)

METRICS_SCHEMA = "uavplan.metrics.v1"
METRICS_COLUMNS = ["method", "instance_id", "n_hotspots", "total_sum_rate_bps",
                   "completion_time_s", "tour_length_m", "similarity_to_oracle"]
METHODS = ("oracle", "ain", "mql")


@dataclass(frozen=True)
class ExperimentConfig:
    channel: ChannelParams = field(default_factory=ChannelParams)
    mission: MissionConfig = field(default_factory=MissionConfig)
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    ql: QTrainConfig = field(default_factory=QTrainConfig)
    pool_seed: int = 20240501
    testing_pool_size: int = 100
    training_pool_size: int = 50
    mean_users: float = 5.0
    depot_m: tuple[float, float] | None = None   # defaults to area center
    m_training: int = 5000
    train_instance_size: int = 5
    train_seed_base: int = 1_000_000
    test_sizes: tuple[int, ...] = (5, 10, 20, 30, 40, 50)
    seeds_per_size: int = 5
    test_seed_base: int = 9_000_000
    ql_train_seed: int = 777
    output_dir: str = "out"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.training_pool_size > self.testing_pool_size:
            raise ConfigurationError("training pool cannot exceed testing pool")
        if self.m_training < 1 or self.seeds_per_size < 1:
            raise ConfigurationError("need at least one example per stage")
        if self.train_instance_size < 2:
            raise ConfigurationError("training instances need >= 2 hotspots")
        if any(s < 1 for s in self.test_sizes):
            raise ConfigurationError("test sizes must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @property
    def depot(self) -> tuple[float, float]:
        if self.depot_m is not None:
            return self.depot_m
        half = self.mission.area_side_m / 2.0
        return (half, half)


@dataclass(frozen=True)
class MetricsRecord:
    method: str
    instance_id: str
    n_hotspots: int
    total_sum_rate_bps: float
    completion_time_s: float
    tour_length_m: float
    similarity_to_oracle: float
    wall_clock_s: float


def completion_time_from(length_m: float, n_visited: int,
                         mission: MissionConfig) -> float:
    return length_m / mission.uav_speed_m_per_s + mission.dwell_time_s * n_visited


def completion_time(t: Tour, mission: MissionConfig) -> float:
    """Travel time of the full closed tour plus per-hotspot dwell."""
    return completion_time_from(t.total_cost_m, len(t.order), mission)


def mission_sum_rate(t: Tour, inst: Instance) -> float:
    """Total profit over visited hotspots, summed in id order so the value
    is identical for any two tours with the same visited set."""
    return sum(inst.hotspot(i).profit_bps for i in sorted(t.visited))


def word_similarity(w1: Word, w2: Word) -> float:
    """1 - edit_distance / max length; 1.0 for two empty words."""
    longest = max(len(w1), len(w2))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(w1, w2) / longest


# --- config (de)serialization ------------------------------------------------

def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = {
        "schema": "uavplan.config.v1",
        "channel": asdict(cfg.channel),
        "mission": asdict(cfg.mission),
        "weights": asdict(cfg.weights),
        "noise": asdict(cfg.noise),
        "planner": {
            "n_words": cfg.planner.n_words,
            "rng_seed": cfg.planner.rng_seed,
            "weights": asdict(cfg.planner.weights),
            "insertion_order": cfg.planner.insertion_order,
        },
        "ql": {
            "learning_rate": cfg.ql.learning_rate,
            "discount": cfg.ql.discount,
            "epsilon_start": cfg.ql.epsilon_start,
            "epsilon_end": cfg.ql.epsilon_end,
            "episodes": cfg.ql.episodes,
            "temperature": cfg.ql.temperature,
            "terminal_bonus": cfg.ql.terminal_bonus,
            "match_tolerance": cfg.ql.match_tolerance,
            "reference_bonus": cfg.ql.reference_bonus,
            "weights": asdict(cfg.ql.weights),
        },
    }
    for k in ("pool_seed", "testing_pool_size", "training_pool_size",
              "mean_users", "depot_m", "m_training", "train_instance_size",
              "train_seed_base", "test_sizes", "seeds_per_size",
              "test_seed_base", "ql_train_seed", "output_dir", "workers"):
        v = getattr(cfg, k)
        d[k] = list(v) if isinstance(v, tuple) else v
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    planner = d.get("planner", {})
    ql = d.get("ql", {})
    return ExperimentConfig(
        channel=ChannelParams(**d.get("channel", {})),
        mission=MissionConfig(**d.get("mission", {})),
        weights=ObjectiveWeights(**d.get("weights", {})),
        noise=NoiseConfig(**d.get("noise", {})),
        planner=PlannerConfig(
            n_words=planner.get("n_words", 10),
            rng_seed=planner.get("rng_seed", 0),
            weights=ObjectiveWeights(**planner.get("weights", {})),
            insertion_order=planner.get("insertion_order", "centroid"),
        ),
        ql=QTrainConfig(
            **{k: v for k, v in ql.items() if k != "weights"},
            weights=ObjectiveWeights(**ql.get("weights", {})),
        ),
        pool_seed=d.get("pool_seed", 20240501),
        testing_pool_size=d.get("testing_pool_size", 100),
        training_pool_size=d.get("training_pool_size", 50),
        mean_users=d.get("mean_users", 5.0),
        depot_m=tuple(d["depot_m"]) if d.get("depot_m") else None,
        m_training=d.get("m_training", 5000),
        train_instance_size=d.get("train_instance_size", 5),
        train_seed_base=d.get("train_seed_base", 1_000_000),
        test_sizes=tuple(d.get("test_sizes", (5, 10, 20, 30, 40, 50))),
        seeds_per_size=d.get("seeds_per_size", 5),
        test_seed_base=d.get("test_seed_base", 9_000_000),
        ql_train_seed=d.get("ql_train_seed", 777),
        output_dir=d.get("output_dir", "out"),
        workers=d.get("workers", 1),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path) as f:
            return config_from_dict(json.load(f))
    except (OSError, json.JSONDecodeError, TypeError, KeyError) as e:
        raise ConfigurationError(f"cannot load config {path}: {e}") from e


# --- atomic artifact IO -------------------------------------------------------

def write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_json_atomic(path: Path, obj: dict) -> None:
    write_text_atomic(path, json.dumps(obj, sort_keys=True,
                                       separators=(",", ":")) + "\n")


def read_json(path: Path) -> dict:
    with open(path) as f:
        return json.load(f)


# --- pipeline stages ----------------------------------------------------------

def stage_pools(cfg: ExperimentConfig,
                out: Path) -> tuple[list[Hotspot], list[Hotspot]]:
    """Testing pool, with the training pool as its leading prefix so that
    trained letters keep their identity at test time."""
    path = out / "pools.json"
    if path.exists():
        d = read_json(path)
        testing = pool_from_dict(d)
    else:
        testing = sample_pool(cfg.pool_seed, cfg.testing_pool_size,
                              cfg.mean_users, cfg.mission, cfg.channel)
        write_json_atomic(path, pool_to_dict(testing, cfg.pool_seed,
                                             cfg.mean_users, cfg.mission,
                                             cfg.channel))
    return testing, testing[:cfg.training_pool_size]


def stage_training_instances(cfg: ExperimentConfig, training_pool,
                             out: Path) -> list[Instance]:
    path = out / "training_instances.jsonl"
    if path.exists():
        with open(path) as f:
            return [instance_from_dict(json.loads(line)) for line in f]
    instances = [
        sample_instance(cfg.train_seed_base + k, training_pool,
                        cfg.train_instance_size, cfg.depot, cfg.channel,
                        cfg.mission)
        for k in range(cfg.m_training)
    ]
    lines = [json.dumps(instance_to_dict(i), sort_keys=True,
                        separators=(",", ":")) for i in instances]
    write_text_atomic(path, "\n".join(lines) + "\n")
    return instances


def _solve_one(args) -> Tour:
    inst, weights = args
    return solve(inst, weights)


def stage_oracle(cfg: ExperimentConfig, instances: Sequence[Instance],
                 out: Path) -> list[Tour]:
    path = out / "oracle_tours.jsonl"
    if path.exists():
        with open(path) as f:
            return [tour_from_dict(json.loads(line)) for line in f]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            tours = list(pool.map(_solve_one,
                                  ((i, cfg.weights) for i in instances),
                                  chunksize=64))
    else:
        tours = [solve(i, cfg.weights) for i in instances]
    lines = [json.dumps(tour_to_dict(t, cfg.weights), sort_keys=True,
                        separators=(",", ":")) for t in tours]
    write_text_atomic(path, "\n".join(lines) + "\n")
    return tours


def stage_world(cfg: ExperimentConfig, tours: Sequence[Tour], training_pool,
                out: Path) -> WorldModel:
    path = out / "world_model.json"
    if path.exists():
        return model_from_dict(read_json(path))
    wm = learn(tours, training_pool, cfg.noise, cfg.mission)
    write_json_atomic(path, model_to_dict(wm))
    return wm


def stage_ql(cfg: ExperimentConfig, instances: Sequence[Instance],
             tours: Sequence[Tour], out: Path) -> QTable:
    path = out / "qtable.json"
    if path.exists():
        return qtable_from_dict(read_json(path))
    q = train_q(list(zip(instances, tours)), cfg.ql, cfg.ql_train_seed)
    write_json_atomic(path, qtable_to_dict(q, cfg.ql))
    return q


def test_instance_id(size: int, k: int) -> str:
    return f"s{size:03d}k{k:03d}"


def test_instance_seed(cfg: ExperimentConfig, size: int, k: int) -> int:
    return cfg.test_seed_base + size * 1000 + k


def iter_test_instances(cfg: ExperimentConfig, testing_pool):
    for size in cfg.test_sizes:
        for k in range(cfg.seeds_per_size):
            iid = test_instance_id(size, k)
            inst = sample_instance(test_instance_seed(cfg, size, k),
                                   testing_pool, size, cfg.depot,
                                   cfg.channel, cfg.mission)
            yield iid, inst


def _evaluate_one(args):
    iid, inst, wm, qtable, cfg = args
    rows: list[MetricsRecord] = []
    artifacts: dict[str, dict] = {}

    t0 = time.perf_counter()
    oracle_tour = solve(inst, cfg.weights)
    oracle_wall = time.perf_counter() - t0
    oracle_word = word_from_tour(oracle_tour)

    t0 = time.perf_counter()
    plan = plan_mission(inst, wm, cfg.planner)
    ain_wall = time.perf_counter() - t0

    t0 = time.perf_counter()
    mql_seed = inst.seed + 17
    mql_word = construct_word(qtable, plan.reference, inst, mql_seed, cfg.ql)
    mql_wall = time.perf_counter() - t0
    mql_tour = make_tour(mql_word.letters, inst, cfg.weights)

    for method, tour, word, wall in (
            ("oracle", oracle_tour, oracle_word, oracle_wall),
            ("ain", plan.tour, plan.final_word, ain_wall),
            ("mql", mql_tour, mql_word, mql_wall)):
        rows.append(MetricsRecord(
            method=method,
            instance_id=iid,
            n_hotspots=len(inst.hotspots),
            total_sum_rate_bps=mission_sum_rate(tour, inst),
            completion_time_s=completion_time(tour, inst.mission),
            tour_length_m=tour.total_cost_m,
            similarity_to_oracle=word_similarity(word, oracle_word),
            wall_clock_s=wall,
        ))
        artifacts[f"tours/{iid}_{method}.json"] = tour_to_dict(tour, cfg.weights)
    artifacts[f"instances/{iid}.json"] = instance_to_dict(inst)
    artifacts[f"traces/{iid}_ain.json"] = plan_to_dict(plan)
    return rows, artifacts


def metrics_csv_text(rows: Sequence[MetricsRecord]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {METRICS_SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    for r in rows:
        writer.writerow([r.method, r.instance_id, r.n_hotspots,
                         repr(r.total_sum_rate_bps), repr(r.completion_time_s),
                         repr(r.tour_length_m), repr(r.similarity_to_oracle)])
    return buf.getvalue()


def stage_eval(cfg: ExperimentConfig, testing_pool, wm: WorldModel,
               qtable: QTable, out: Path) -> list[MetricsRecord]:
    path = out / "metrics.csv"
    if path.exists():
        return read_metrics(path)
    tasks = [(iid, inst, wm, qtable, cfg)
             for iid, inst in iter_test_instances(cfg, testing_pool)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_evaluate_one, tasks, chunksize=1))
    else:
        results = [_evaluate_one(t) for t in tasks]

    rows: list[MetricsRecord] = []
    for task_rows, artifacts in results:
        rows.extend(task_rows)
        for rel, obj in artifacts.items():
            write_json_atomic(out / rel, obj)

    timing = io.StringIO()
    tw = csv.writer(timing, lineterminator="\n")
    tw.writerow(["method", "instance_id", "wall_clock_s"])
    for r in rows:
        tw.writerow([r.method, r.instance_id, repr(r.wall_clock_s)])
    write_text_atomic(out / "timings.csv", timing.getvalue())
    write_text_atomic(path, metrics_csv_text(rows))
    return rows


def read_metrics(path: Path) -> list[MetricsRecord]:
    rows = []
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    for rec in csv.DictReader(lines):
        rows.append(MetricsRecord(
            method=rec["method"], instance_id=rec["instance_id"],
            n_hotspots=int(rec["n_hotspots"]),
            total_sum_rate_bps=float(rec["total_sum_rate_bps"]),
            completion_time_s=float(rec["completion_time_s"]),
            tour_length_m=float(rec["tour_length_m"]),
            similarity_to_oracle=float(rec["similarity_to_oracle"]),
            wall_clock_s=0.0,
        ))
    return rows


def _mean_ci(values: Sequence[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    if len(values) < 2:
        return mean, 0.0
    half = 1.96 * statistics.stdev(values) / math.sqrt(len(values))
    return mean, half


def summarize(rows: Sequence[MetricsRecord]) -> list[dict]:
    """Per (size, method) means with normal-approximation 95% intervals."""
    sizes = sorted({r.n_hotspots for r in rows})
    out = []
    for size in sizes:
        for method in METHODS:
            sel = [r for r in rows
                   if r.n_hotspots == size and r.method == method]
            if not sel:
                continue
            rate_m, rate_h = _mean_ci([r.total_sum_rate_bps for r in sel])
            time_m, time_h = _mean_ci([r.completion_time_s for r in sel])
            len_m, len_h = _mean_ci([r.tour_length_m for r in sel])
            sim_m, sim_h = _mean_ci([r.similarity_to_oracle for r in sel])
            out.append({
                "n_hotspots": size, "method": method, "n_instances": len(sel),
                "sum_rate_mean_bps": rate_m, "sum_rate_ci_bps": rate_h,
                "completion_mean_s": time_m, "completion_ci_s": time_h,
                "length_mean_m": len_m, "length_ci_m": len_h,
                "similarity_mean": sim_m, "similarity_ci": sim_h,
            })
    return out


def completion_ratios(rows: Sequence[MetricsRecord]) -> list[dict]:
    """Mean completion time of each method relative to the oracle, per size."""
    sizes = sorted({r.n_hotspots for r in rows})
    out = []
    for size in sizes:
        base = [r.completion_time_s for r in rows
                if r.n_hotspots == size and r.method == "oracle"]
        if not base:
            continue
        base_mean = statistics.fmean(base)
        entry = {"n_hotspots": size}
        for method in ("ain", "mql"):
            sel = [r.completion_time_s for r in rows
                   if r.n_hotspots == size and r.method == method]
            entry[f"{method}_over_oracle"] = (
                statistics.fmean(sel) / base_mean if sel and base_mean > 0
                else float("nan"))
        out.append(entry)
    return out


def stage_report(cfg: ExperimentConfig, out: Path) -> None:
    rows = read_metrics(out / "metrics.csv")
    if not rows:
        raise ConfigurationError("metrics.csv is empty; run eval first")

    buf = io.StringIO()
    summary = summarize(rows)
    writer = csv.DictWriter(buf, fieldnames=list(summary[0].keys()),
                            lineterminator="\n")
    writer.writeheader()
    for rec in summary:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                         for k, v in rec.items()})
    write_text_atomic(out / "summary.csv", buf.getvalue())

    ratios = completion_ratios(rows)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(ratios[0].keys()),
                            lineterminator="\n")
    writer.writeheader()
    for rec in ratios:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                         for k, v in rec.items()})
    write_text_atomic(out / "ratios.csv", buf.getvalue())

    # polyline per tour: depot, ordered hotspot centers, depot
    for r in rows:
        inst = instance_from_dict(read_json(out / f"instances/{r.instance_id}.json"))
        tour = tour_from_dict(read_json(
            out / f"tours/{r.instance_id}_{r.method}.json"))
        lines = ["x_m,y_m"]
        pts = [inst.depot_m] + [inst.hotspot(i).center_m for i in tour.order] \
            + [inst.depot_m]
        for x, y in pts:
            lines.append(f"{x!r},{y!r}")
        write_text_atomic(out / f"trajectories/{r.instance_id}_{r.method}.csv",
                          "\n".join(lines) + "\n")


def run_pipeline(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """Execute every stage in order, resuming from existing artifacts."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json_atomic(out / "config.json", config_to_dict(cfg))
    testing_pool, training_pool = stage_pools(cfg, out)
    instances = stage_training_instances(cfg, training_pool, out)
    tours = stage_oracle(cfg, instances, out)
    wm = stage_world(cfg, tours, training_pool, out)
    qtable = stage_ql(cfg, instances, tours, out)
    rows = stage_eval(cfg, testing_pool, wm, qtable, out)
    stage_report(cfg, out)
    return rows
