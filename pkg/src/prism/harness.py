"""Declarative experiment runner: problems x optimizers x grids -> CSV/JSON.

A run is described by a TOML file::

    steps = 500
    seed = 0

    [problem]
    kind = "quadratic"
    rows = 16
    cols = 8

    [optimizer]
    kind = "prism"
    gamma = 1.0

    [schedule]
    warmup_steps = 50
    lr_max = 0.05
    lr_final = 0.005

    [grid]
    gamma = [0.0, 0.5, 1.0, 2.0]

Grid cells are independent runs; each re-creates its problem and random
streams from the seed, so cells with the same seed see the same noise.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .linalg import CUBIC, DEFAULT_NS, MUON_QUINTIC, NsCoefficients
from .optim import (
    AdamW,
    HybridOptimizer,
    Muon,
    Prism,
    PrismConfig,
    Schedule,
    TikhonovConfig,
    TikhonovMuon,
    clip_gradients,
    cosine_schedule,
)
from .problems import MlpTask, NoisyQuadratic, Rng, ToyMlp, mlp_forward_backward, quadratic_grad, quadratic_loss
from .spectral import spectral_report

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

METRICS_SCHEMA = "prism-metrics-v1"
PROBE_SCHEMA = "prism-probe-v1"
SWEEP_SCHEMA = "prism-sweep-v1"
METRICS_COLUMNS = ("run_id", "step", "lr", "loss", "grad_norm", "update_fro_norm",
                   "param_fro_norm", "diverged", "wall_ms")
PROBE_COLUMNS = ("run_id", "step", "param", "k", "eigenvalue", "signal_energy", "noise_energy",
                 "snr", "gain_theoretical", "gain_empirical")
SWEEP_COLUMNS = ("rank", "run_id", "gamma", "lr_max", "final_loss", "min_loss", "diverged")
DIVERGENCE_NORM = 1e9
DIVERGENCE_RULE = f"non-finite loss or parameter Frobenius norm > {DIVERGENCE_NORM:g}"

NS_PRESETS = {"default": DEFAULT_NS, "muon": MUON_QUINTIC, "cubic": CUBIC}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "quadratic"
    # quadratic
    rows: int = 16
    cols: int = 8
    condition: float = 1e3
    noise: float = 1.0
    noisy_fraction: float = 0.5
    init_scale: float = 1.0
    # mlp
    d_in: int = 8
    d_hidden: int = 16
    d_out: int = 4
    n_samples: int = 256
    batch_size: int = 128
    teacher_noise: float = 0.1


@dataclass(frozen=True)
class OptimizerSpec:
    kind: str = "prism"
    beta: float = 0.95
    gamma: float = 1.0
    nesterov: bool = False
    side: str = "right"
    polar: str = "iterative"
    ns: str = "default"
    ns_iterations: int = 0
    lam: float = 0.1
    lr_scale: str = "none"
    lr_scale_c: float = 0.2
    weight_decay: float = 0.01
    adamw_beta1: float = 0.9
    adamw_beta2: float = 0.95
    adamw_eps: float = 1e-8
    adamw_weight_decay: float = 0.01
    adamw_lr_ratio: float = 0.25

    def ns_coefficients(self) -> NsCoefficients:
        coeffs = NS_PRESETS[self.ns]
        return coeffs.with_iterations(self.ns_iterations) if self.ns_iterations else coeffs


@dataclass(frozen=True)
class ScheduleSpec:
    warmup_steps: int = 0
    lr_max: float = 0.02
    lr_final: float = 0.002


@dataclass(frozen=True)
class GridSpec:
    gamma: tuple = ()
    lr_max: tuple = ()

    def __bool__(self) -> bool:
        return bool(self.gamma or self.lr_max)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    steps: int = 100
    seed: int = 0
    clip_threshold: float = 10.0
    probe_every: int = 0
    record_wall_time: bool = True
    output: str = ""
    name: str = "experiment"

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        raw = dict(raw)
        sections = {"problem": ProblemSpec, "optimizer": OptimizerSpec,
                    "schedule": ScheduleSpec, "grid": GridSpec}
        kwargs = {}
        for key, spec in sections.items():
            body = raw.pop(key, {})
            if not isinstance(body, dict):
                raise ConfigError(f"[{key}] must be a table")
            kwargs[key] = _build(spec, body, key)
        top = _build(cls, raw, "top level", skip=set(sections))
        cfg = replace(top, **kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = asdict(self)
        out["grid"] = {k: list(v) for k, v in out["grid"].items()}
        return out

    def validate(self) -> None:
        p, o, s = self.problem, self.optimizer, self.schedule
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if p.kind not in ("quadratic", "mlp"):
            raise ConfigError(f"unknown problem kind {p.kind!r}")
        if o.kind not in ("prism", "muon", "tikhonov", "adamw"):
            raise ConfigError(f"unknown optimizer kind {o.kind!r}")
        if o.ns not in NS_PRESETS:
            raise ConfigError(f"unknown ns schedule {o.ns!r}; choose from {sorted(NS_PRESETS)}")
        if self.grid.gamma and o.kind != "prism":
            raise ConfigError("a gamma grid needs optimizer kind 'prism'")
        if self.probe_every < 0:
            raise ConfigError("probe_every must be >= 0")
        if self.clip_threshold < 0:
            raise ConfigError("clip_threshold must be >= 0 (0 disables clipping)")
        if s.warmup_steps > self.steps:
            raise ConfigError("warmup_steps exceeds steps")
        for g in (o.gamma, *self.grid.gamma):
            if g < 0:
                raise ConfigError(f"gamma must be >= 0, got {g}")
        for lr in (s.lr_max, *self.grid.lr_max):
            if lr < 0:
                raise ConfigError(f"lr_max must be >= 0, got {lr}")
        try:
            for cell in self.cells():
                cell.build_optimizer(self.problem_params_preview())
                cell.build_problem()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def cells(self) -> list[RunCell]:
        gammas = self.grid.gamma or (self.optimizer.gamma,)
        lrs = self.grid.lr_max or (self.schedule.lr_max,)
        return [
            RunCell(f"r{i:03d}", self, float(g), float(lr))
            for i, (g, lr) in enumerate(itertools.product(gammas, lrs))
        ]

    def problem_params_preview(self) -> dict:
        p = self.problem
        if p.kind == "quadratic":
            return {"W": np.zeros((p.rows, p.cols))}
        return {"W1": np.zeros((p.d_in, p.d_hidden)), "b1": np.zeros(p.d_hidden),
                "W2": np.zeros((p.d_hidden, p.d_out)), "b2": np.zeros(p.d_out)}


def _build(cls, body: dict, where: str, skip=frozenset()):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in body.items():
        if key in skip:
            continue
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in {where}")
        default = known[key].default
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)) or not value:
                raise ConfigError(f"{where}.{key} must be a non-empty list")
            value = tuple(float(v) for v in value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{where}.{key} must be true/false")
        elif isinstance(default, int):
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(f"{where}.{key} must be an integer")
            value = int(value)
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}.{key} must be a number")
            value = float(value)
        kwargs[key] = value
    return cls(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    cfg = ExperimentConfig.from_dict(raw)
    if not cfg.output:
        cfg = replace(cfg, output=str(Path(path).with_suffix("")) + "_out")
    return cfg


def override(cfg: ExperimentConfig, seed: int | None = None, exact_polar: bool = False,
             output: str | None = None) -> ExperimentConfig:
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if exact_polar:
        cfg = replace(cfg, optimizer=replace(cfg.optimizer, polar="exact"))
    if output:
        cfg = replace(cfg, output=output)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Running


@dataclass(frozen=True)
class RunCell:
    run_id: str
    config: ExperimentConfig
    gamma: float
    lr_max: float

    def build_problem(self):
        p, seed = self.config.problem, self.config.seed
        if p.kind == "quadratic":
            return NoisyQuadratic.anisotropic(p.rows, p.cols, p.condition, p.noise,
                                              p.noisy_fraction, seed=seed, init_scale=p.init_scale)
        return MlpTask(p.d_in, p.d_hidden, p.d_out, p.n_samples, p.batch_size, p.teacher_noise, seed=seed)

    def build_optimizer(self, params: dict) -> HybridOptimizer:
        o = self.config.optimizer
        common = dict(beta=o.beta, nesterov=o.nesterov, polar=o.polar, ns=o.ns_coefficients(),
                      lr_scale=o.lr_scale, lr_scale_c=o.lr_scale_c, weight_decay=o.weight_decay)
        if o.kind == "prism" and self.gamma > 0:
            spectral = Prism(PrismConfig(gamma=self.gamma, side=o.side, **common))
        elif o.kind in ("prism", "muon"):
            spectral = Muon(PrismConfig(gamma=0.0, side=o.side, **common))
        elif o.kind == "tikhonov":
            spectral = TikhonovMuon(TikhonovConfig(lam=o.lam, **common))
        else:
            spectral = None
        adamw = AdamW(o.adamw_beta1, o.adamw_beta2, o.adamw_eps, o.adamw_weight_decay)
        ratio = 1.0 if spectral is None else o.adamw_lr_ratio
        return HybridOptimizer(params, spectral, adamw, adamw_lr_ratio=ratio)

    def schedule(self) -> Schedule:
        s = self.config.schedule
        lr_final = s.lr_final * (self.lr_max / s.lr_max) if s.lr_max > 0 else s.lr_final
        return Schedule(s.warmup_steps, self.config.steps, self.lr_max, lr_final)


@dataclass
class RunResult:
    run_id: str
    gamma: float
    lr_max: float
    metrics: list[dict]
    probes: list[dict]
    initial_loss: float
    final_loss: float
    min_loss: float
    diverged: bool
    diverged_step: int | None
    final_param_norm: float

    def summary(self) -> dict:
        return {
            "run_id": self.run_id,
            "gamma": self.gamma,
            "lr_max": self.lr_max,
            "steps_completed": len(self.metrics),
            "initial_loss": _json_float(self.initial_loss),
            "final_loss": _json_float(self.final_loss),
            "min_loss": _json_float(self.min_loss),
            "diverged": self.diverged,
            "diverged_step": self.diverged_step,
            "final_param_norm": _json_float(self.final_param_norm),
        }


def _total_norm(params: dict) -> float:
    return math.sqrt(sum(float(np.sum(p * p)) for p in params.values()))


def _is_diverged(loss: float, norm: float) -> bool:
    return not math.isfinite(loss) or not math.isfinite(norm) or norm > DIVERGENCE_NORM


def run_cell(cell: RunCell) -> RunResult:
    cfg = cell.config
    problem = cell.build_problem()
    grad_rng = Rng(cfg.seed, "gradient-noise")
    if isinstance(problem, NoisyQuadratic):
        params = {"W": problem.initial_point()}

        def loss_and_grads(ps):
            return quadratic_loss(problem, ps["W"]), {"W": quadratic_grad(problem, ps["W"], grad_rng)}

        def eval_loss(ps):
            return quadratic_loss(problem, ps["W"])
    else:
        params = problem.init_model().params()

        def loss_and_grads(ps):
            bx, by = problem.sample_batch(grad_rng)
            return mlp_forward_backward(ToyMlp.from_params(ps), bx, by)

        def eval_loss(ps):
            return problem.full_loss(ToyMlp.from_params(ps))

    opt = cell.build_optimizer(params)
    sched = cell.schedule()
    names = list(params)
    initial_loss = eval_loss(params)
    metrics, probes = [], []
    diverged, diverged_step = False, None
    losses = [initial_loss]

    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, cfg.steps + 1):
            t0 = time.perf_counter()
            lr = cosine_schedule(step, sched)
            loss, grads = loss_and_grads(params)
            grad_list = [grads[n] for n in names]
            grad_ok = all(np.all(np.isfinite(g)) for g in grad_list)
            if grad_ok and cfg.clip_threshold > 0:
                grad_list, grad_norm = clip_gradients(grad_list, cfg.clip_threshold)
            else:
                grad_norm = math.sqrt(sum(float(np.sum(g * g)) for g in grad_list))
            update_norm = 0.0
            if grad_ok and math.isfinite(loss):
                new = opt.step(params, dict(zip(names, grad_list)), lr)
                update_norm = math.sqrt(sum(float(np.sum((new[n] - params[n]) ** 2)) for n in names))
                params = new
            param_norm = _total_norm(params)
            now_diverged = not grad_ok or _is_diverged(loss, param_norm)
            if not now_diverged:
                losses.append(loss)
            if cfg.probe_every and step % cfg.probe_every == 0 and not now_diverged:
                probes.extend(_probe_rows(cell, step, opt))
            wall_ms = (time.perf_counter() - t0) * 1e3 if cfg.record_wall_time else 0.0
            metrics.append({
                "run_id": cell.run_id, "step": step, "lr": lr, "loss": loss,
                "grad_norm": grad_norm, "update_fro_norm": update_norm,
                "param_fro_norm": param_norm, "diverged": int(now_diverged), "wall_ms": wall_ms,
            })
            if now_diverged:
                diverged, diverged_step = True, step
                log.info("%s diverged at step %d", cell.run_id, step)
                break

        final_loss = math.inf if diverged else eval_loss(params)
    if math.isfinite(final_loss):
        losses.append(final_loss)
    return RunResult(cell.run_id, cell.gamma, cell.lr_max, metrics, probes, initial_loss,
                     final_loss, min(losses), diverged, diverged_step, _total_norm(params))


def _probe_rows(cell: RunCell, step: int, opt: HybridOptimizer) -> list[dict]:
    if not isinstance(opt.spectral, (Prism,)) or isinstance(opt.spectral, TikhonovMuon):
        return []
    gamma = opt.spectral.config.gamma
    rows = []
    for name, info in opt.last_steps.items():
        if not np.any(info.momentum) and not np.any(info.innovation):
            continue
        report = spectral_report(info.momentum, info.innovation, gamma, direction=info.direction)
        for r in report.rows():
            rows.append({"run_id": cell.run_id, "step": step, "param": name, **r})
    return rows


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunResult]

    def metrics(self) -> list[dict]:
        return [row for r in self.runs for row in r.metrics]

    def probes(self) -> list[dict]:
        return [row for r in self.runs for row in r.probes]

    def ranking(self) -> list[dict]:
        """Cells sorted by final loss (diverged last), ties to lower gamma then lower lr."""
        order = sorted(self.runs, key=lambda r: (r.diverged, r.final_loss, r.gamma, r.lr_max))
        return [
            {"rank": i + 1, "run_id": r.run_id, "gamma": r.gamma, "lr_max": r.lr_max,
             "final_loss": r.final_loss, "min_loss": r.min_loss, "diverged": int(r.diverged)}
            for i, r in enumerate(order)
        ]

    def summary(self) -> dict:
        return {
            "schema": METRICS_SCHEMA,
            "name": self.config.name,
            "divergence_rule": DIVERGENCE_RULE,
            "runs": [dict(r.summary(), config=self.config.to_dict()) for r in self.runs],
            "ranking": [{**row, "final_loss": _json_float(row["final_loss"]),
                         "min_loss": _json_float(row["min_loss"])} for row in self.ranking()],
        }

    def write(self, out_dir, sweep: bool = False) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"metrics": out / "metrics.csv", "summary": out / "summary.json"}
        paths["metrics"].write_text(to_csv(self.metrics(), METRICS_COLUMNS, METRICS_SCHEMA), encoding="utf-8")
        paths["summary"].write_text(json.dumps(self.summary(), indent=2) + "\n", encoding="utf-8")
        if self.config.probe_every:
            paths["probe"] = out / "probe.csv"
            paths["probe"].write_text(to_csv(self.probes(), PROBE_COLUMNS, PROBE_SCHEMA), encoding="utf-8")
        if sweep:
            paths["sweep"] = out / "sweep.csv"
            paths["sweep"].write_text(to_csv(self.ranking(), SWEEP_COLUMNS, SWEEP_SCHEMA), encoding="utf-8")
        return paths


def _json_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def to_csv(rows: list[dict], columns, schema: str) -> str:
    buf = io.StringIO()
    buf.write(f"#schema={schema}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def run_experiment(config: ExperimentConfig, out_dir=None, threads: int = 1) -> ExperimentResult:
    """Run every grid cell of ``config`` and optionally write the outputs.

    Divergence is recorded in the results, never raised.
    """
    config.validate()
    cells = config.cells()
    if threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(run_cell, cells))
    else:
        runs = [run_cell(c) for c in cells]
    result = ExperimentResult(config, runs)
    if out_dir is not None:
        result.write(out_dir)
    return result


def sweep(config: ExperimentConfig, out_dir=None, threads: int = 1) -> list[dict]:
    """Run a grid and return the ranked table (one row per cell)."""
    if not config.grid:
        raise ConfigError("sweep needs a non-empty [grid] section")
    result = run_experiment(config, threads=threads)
    if out_dir is not None:
        result.write(out_dir, sweep=True)
    return result.ranking()


def probe(config: ExperimentConfig, out_dir=None, threads: int = 1) -> list[dict]:
    """Run with spectral probing and return the per-direction rows."""
    if config.probe_every < 1:
        raise ConfigError("probe needs probe_every >= 1")
    result = run_experiment(config, threads=threads)
    if out_dir is not None:
        result.write(out_dir)
    return result.probes()
