"""Experiment configuration: JSON files with strict keys and per-scenario defaults."""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gainsched.core_model import TaskSpec
from gainsched.data import RngStream
from gainsched.policies import PolicyConfig, PolicyKind
from gainsched.simulator import SimConfig

SCENARIOS = ("tradeoff", "bias_hist", "compare", "bounds", "simulate")
RESOLVED_NAME = "resolved_config.json"
TASK_KEYS = {"true_weights", "input_second_moment", "noise_variance"}
SETTING_KEYS = {"stepsize", "batch_size"}
# spawn key for generating random task parameters; disjoint from run indices in practice
TASK_GENERATION_STREAM = 2**32 - 1


class ConfigError(ValueError):
    pass


def setup_a(noise_variance: float = 1.0) -> dict:
    return {
        "true_weights": [3.0, 5.0],
        "input_second_moment": [[3.0, 0.0], [0.0, 1.0]],
        "noise_variance": noise_variance,
    }


def random_tasks(master_seed: int, count: int = 2, dim: int = 2) -> list[dict]:
    """Random SPD tasks with eigenvalues in [0.5, 3] and weights in [-5, 5]^dim."""
    gen = RngStream(master_seed, (TASK_GENERATION_STREAM,)).generator
    tasks = []
    for _ in range(count):
        q, _ = np.linalg.qr(gen.standard_normal((dim, dim)))
        eig = gen.uniform(0.5, 3.0, size=dim)
        h = (q * eig) @ q.T
        h = 0.5 * (h + h.T)
        tasks.append(
            {
                "true_weights": gen.uniform(-5.0, 5.0, size=dim).tolist(),
                "input_second_moment": h.tolist(),
                "noise_variance": 1.0,
            }
        )
    return tasks


BASE_DEFAULTS = {
    "runs": 1000,
    "horizon": 20,
    "batch_size": 20,
    "stepsizes": [0.1],
    "policy": "threshold",
    "lambda": 1.0,
    "budget": 1,
    "gain_mode": "estimated",
    "allow_unstable": False,
    "exact_gradient": False,
    "shared_data": False,
    "lambda_grid": [],
    "settings": [],
    "stepsize_grid": [],
    "bins": 40,
    "hist_range": None,
    "workers": 1,
}

SCENARIO_DEFAULTS = {
    "tradeoff": {
        "lambda_grid": [0.0, 0.2, 0.5, 1.0, 2.0, 5.0],
        "settings": [{"stepsize": 0.1, "batch_size": 20}, {"stepsize": 0.15, "batch_size": 2}],
    },
    "bias_hist": {
        "runs": 5000,
        "horizon": 1,
        "batch_size": 5,
        "policy": "greedy_gain",
    },
    "compare": {
        "runs": 2000,
        "batch_size": 5,
        "policy": "greedy_gain",
        "stepsize_grid": [0.1, 0.2],
    },
    "bounds": {
        "runs": 2000,
        "horizon": 200,
        "gain_mode": "oracle",
        "lambda_grid": [1.0, 2.0],
    },
    "simulate": {},
}


def _default_tasks(scenario: str, seed: int) -> list[dict]:
    if scenario == "bias_hist":
        return random_tasks(seed)
    if scenario == "compare":
        return [setup_a(), setup_a()]
    return [setup_a()]


@dataclass
class ExperimentConfig:
    scenario: str
    master_seed: int
    tasks: list[dict]
    initial_weights: list[list[float]]
    stepsizes: list[float]
    runs: int
    horizon: int
    batch_size: int
    policy: str
    lam: float
    budget: int
    gain_mode: str
    allow_unstable: bool
    exact_gradient: bool
    shared_data: bool
    lambda_grid: list[float]
    settings: list[dict]
    stepsize_grid: list[float]
    bins: int
    hist_range: list[float] | None
    workers: int = field(default=1, compare=False)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    def task_specs(self) -> list[TaskSpec]:
        return [TaskSpec(**t) for t in self.tasks]

    def policy_config(self, **overrides) -> PolicyConfig:
        kw = {"kind": self.policy, "lam": self.lam, "budget": self.budget, "gain_mode": self.gain_mode}
        kw.update(overrides)
        return PolicyConfig(**kw)

    def sim_config(self, *, stepsize=None, batch_size=None, horizon=None, **policy_overrides) -> SimConfig:
        m = len(self.tasks)
        stepsizes = self.stepsizes if stepsize is None else [stepsize] * m
        return SimConfig(
            tasks=tuple(self.task_specs()),
            initial_weights=tuple(self.initial_weights),
            stepsizes=tuple(stepsizes),
            batch_size=self.batch_size if batch_size is None else batch_size,
            horizon=self.horizon if horizon is None else horizon,
            policy=self.policy_config(**policy_overrides),
            master_seed=self.master_seed,
            allow_unstable=self.allow_unstable,
            exact_gradient=self.exact_gradient,
            shared_data=self.shared_data,
        )


def _expect(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _number(value, key: str) -> float:
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool), key, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, key: str, minimum: int) -> int:
    _expect(isinstance(value, int) and not isinstance(value, bool), key, f"expected an integer, got {value!r}")
    _expect(value >= minimum, key, f"must be >= {minimum}, got {value}")
    return value


def _boolean(value, key: str) -> bool:
    _expect(isinstance(value, bool), key, f"expected true/false, got {value!r}")
    return value


def _numbers(value, key: str) -> list[float]:
    _expect(isinstance(value, list), key, f"expected a list, got {value!r}")
    return [_number(v, f"{key}[{i}]") for i, v in enumerate(value)]


def _resolve_tasks(raw, key="tasks") -> list[dict]:
    _expect(isinstance(raw, list) and len(raw) > 0, key, "expected a nonempty list of tasks")
    tasks = []
    for j, t in enumerate(raw):
        tk = f"{key}[{j}]"
        _expect(isinstance(t, dict), tk, "expected an object")
        unknown = sorted(set(t) - TASK_KEYS)
        _expect(not unknown, f"{tk}.{unknown[0] if unknown else ''}", "unknown key")
        for req in ("true_weights", "input_second_moment"):
            _expect(req in t, f"{tk}.{req}", "missing required key")
        w = _numbers(t["true_weights"], f"{tk}.true_weights")
        hk = f"{tk}.input_second_moment"
        _expect(isinstance(t["input_second_moment"], list), hk, "expected a matrix (list of rows)")
        h = [_numbers(row, f"{hk}[{i}]") for i, row in enumerate(t["input_second_moment"])]
        task = {
            "true_weights": w,
            "input_second_moment": h,
            "noise_variance": _number(t.get("noise_variance", 1.0), f"{tk}.noise_variance"),
        }
        try:
            TaskSpec(**task)
        except ValueError as exc:
            raise ConfigError(f"{tk}: {exc}") from exc
        tasks.append(task)
    return tasks


def resolve(raw: dict, scenario: str | None = None, seed: int | None = None) -> ExperimentConfig:
    """Validate a raw mapping and materialise every default."""
    if not isinstance(raw, dict):
        raise ConfigError(f"<root>: expected an object, got {type(raw).__name__}")
    raw = copy.deepcopy(raw)
    file_scenario = raw.pop("scenario", None)
    if scenario is None:
        scenario = file_scenario
    elif file_scenario is not None and file_scenario != scenario:
        raise ConfigError(f"scenario: config says {file_scenario!r} but the command runs {scenario!r}")
    _expect(scenario in SCENARIOS, "scenario", f"expected one of {', '.join(SCENARIOS)}, got {scenario!r}")

    allowed = set(BASE_DEFAULTS) | {"master_seed", "tasks", "initial_weights"}
    for key in raw:
        _expect(key in allowed, key, "unknown key")

    if seed is not None:
        raw["master_seed"] = seed
    _expect("master_seed" in raw, "master_seed", "required (set it in the config or pass --seed)")
    master_seed = raw["master_seed"]
    _expect(
        isinstance(master_seed, int) and not isinstance(master_seed, bool) and 0 <= master_seed < 2**64,
        "master_seed",
        f"expected an unsigned 64-bit integer, got {master_seed!r}",
    )

    merged = {**BASE_DEFAULTS, **SCENARIO_DEFAULTS[scenario], **raw}
    tasks = _resolve_tasks(merged["tasks"] if "tasks" in raw else _default_tasks(scenario, master_seed))
    m = len(tasks)

    if "initial_weights" in raw:
        iw = raw["initial_weights"]
        _expect(isinstance(iw, list) and len(iw) == m, "initial_weights", f"expected a list of {m} vectors")
        initial = [_numbers(w, f"initial_weights[{j}]") for j, w in enumerate(iw)]
    else:
        initial = [[0.0] * len(t["true_weights"]) for t in tasks]

    steps = merged["stepsizes"]
    if isinstance(steps, (int, float)) and not isinstance(steps, bool):
        steps = [steps]
    steps = _numbers(steps, "stepsizes")
    if len(steps) == 1:
        steps = steps * m
    _expect(len(steps) == m, "stepsizes", f"expected 1 or {m} values, got {len(steps)}")

    settings = merged["settings"]
    _expect(isinstance(settings, list), "settings", "expected a list")
    resolved_settings = []
    for i, s in enumerate(settings):
        sk = f"settings[{i}]"
        _expect(isinstance(s, dict), sk, "expected an object")
        _expect(set(s) == SETTING_KEYS, sk, f"expected exactly the keys {sorted(SETTING_KEYS)}")
        resolved_settings.append(
            {"stepsize": _number(s["stepsize"], f"{sk}.stepsize"), "batch_size": _integer(s["batch_size"], f"{sk}.batch_size", 1)}
        )

    hist_range = merged["hist_range"]
    if hist_range is not None:
        hist_range = _numbers(hist_range, "hist_range")
        _expect(len(hist_range) == 2 and hist_range[0] < hist_range[1], "hist_range", "expected [low, high] with low < high")

    policy = merged["policy"]
    _expect(policy in {k.value for k in PolicyKind}, "policy", f"unknown policy kind {policy!r}")
    gain_mode = merged["gain_mode"]
    _expect(gain_mode in ("estimated", "oracle"), "gain_mode", f"expected 'estimated' or 'oracle', got {gain_mode!r}")
    lam = _number(merged["lambda"], "lambda")
    _expect(lam >= 0, "lambda", f"must be >= 0, got {lam}")

    cfg = ExperimentConfig(
        scenario=scenario,
        master_seed=master_seed,
        tasks=tasks,
        initial_weights=initial,
        stepsizes=steps,
        runs=_integer(merged["runs"], "runs", 1),
        horizon=_integer(merged["horizon"], "horizon", 1),
        batch_size=_integer(merged["batch_size"], "batch_size", 1),
        policy=policy,
        lam=lam,
        budget=_integer(merged["budget"], "budget", 1),
        gain_mode=gain_mode,
        allow_unstable=_boolean(merged["allow_unstable"], "allow_unstable"),
        exact_gradient=_boolean(merged["exact_gradient"], "exact_gradient"),
        shared_data=_boolean(merged["shared_data"], "shared_data"),
        lambda_grid=_numbers(merged["lambda_grid"], "lambda_grid"),
        settings=resolved_settings,
        stepsize_grid=_numbers(merged["stepsize_grid"], "stepsize_grid"),
        bins=_integer(merged["bins"], "bins", 2),
        hist_range=hist_range,
        workers=_integer(merged["workers"], "workers", 1),
    )
    _validate_scenario(cfg)
    return cfg


def _check_sim(cfg: ExperimentConfig, key: str, **kw) -> None:
    try:
        cfg.sim_config(**kw)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _validate_scenario(cfg: ExperimentConfig) -> None:
    m = len(cfg.tasks)
    s = cfg.scenario
    if s == "tradeoff":
        _expect(cfg.policy == "threshold", "policy", "the tradeoff scenario sweeps the threshold policy")
        _expect(len(cfg.lambda_grid) > 0, "lambda_grid", "must be nonempty")
        _expect(len(cfg.settings) > 0, "settings", "must be nonempty")
        for i, st in enumerate(cfg.settings):
            _check_sim(cfg, f"settings[{i}]", stepsize=st["stepsize"], batch_size=st["batch_size"])
        return
    if s == "bias_hist":
        _expect(m == 2, "tasks", f"the bias histogram scenario needs exactly 2 tasks, got {m}")
    if s == "compare":
        _expect(m >= 2, "tasks", f"policy comparison needs at least 2 tasks, got {m}")
        _expect(len(cfg.stepsize_grid) > 0, "stepsize_grid", "must be nonempty")
        for i, eps in enumerate(cfg.stepsize_grid):
            _check_sim(cfg, f"stepsize_grid[{i}]", stepsize=eps, kind="greedy_gain", gain_mode="estimated")
        return
    if s == "bounds":
        _expect(m == 1, "tasks", f"bound checks need a single task, got {m}")
        _expect(cfg.policy == "threshold", "policy", "bound checks apply to the threshold policy")
        _expect(len(cfg.lambda_grid) > 0, "lambda_grid", "must be nonempty")
        for i, lam in enumerate(cfg.lambda_grid):
            _expect(lam > 0, f"lambda_grid[{i}]", "communication budget needs lambda > 0")
    _check_sim(cfg, "stepsizes")


def load_raw(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def parse_config(path=None, scenario: str | None = None, seed: int | None = None) -> ExperimentConfig:
    raw = load_raw(path) if path is not None else {}
    return resolve(raw, scenario=scenario, seed=seed)


def write_resolved(cfg: ExperimentConfig, out_dir) -> Path:
    path = Path(out_dir) / RESOLVED_NAME
    path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return path
