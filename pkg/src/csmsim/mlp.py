"""Single-hidden-layer tanh networks used as CSM current surrogates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .celllib import CellKind, TechnologyParams
from .characterize import DEFAULT_RAIL_FRACTION, Dataset, SignedLog, sample_dataset, split_dataset
from .errors import ConfigError, ContractViolation, ParseError, SearchFailure, TrainingError

SEARCH_SIZES = tuple(range(5, 41))


@dataclass
class MlpModel:
    kind: CellKind
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: float = 0.0
    target_std: float = 1.0
    transform: SignedLog = field(default_factory=SignedLog)
    activation: str = "tanh"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = CellKind.parse(self.kind)
        self.w1 = np.atleast_2d(np.asarray(self.w1, dtype=float))
        self.b1 = np.asarray(self.b1, dtype=float).reshape(-1)
        self.w2 = np.asarray(self.w2, dtype=float).reshape(-1)
        self.b2 = float(self.b2)
        self.input_mean = np.asarray(self.input_mean, dtype=float).reshape(-1)
        self.input_std = np.asarray(self.input_std, dtype=float).reshape(-1)
        h, d = self.w1.shape
        if h < 1:
            raise ContractViolation("hidden layer must have at least one unit")
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise ContractViolation("b1 and w2 must have one entry per hidden unit")
        if self.input_mean.shape != (d,) or self.input_std.shape != (d,):
            raise ContractViolation("input normalization must have one entry per input")
        if self.activation != "tanh":
            raise ContractViolation(f"unsupported activation {self.activation!r}")
        params = [self.w1, self.b1, self.w2, [self.b2], self.input_mean, self.input_std,
                  [self.target_mean, self.target_std]]
        if not all(np.all(np.isfinite(p)) for p in params):
            raise ContractViolation("model parameters must be finite")
        if np.any(self.input_std <= 0) or self.target_std <= 0:
            raise ContractViolation("normalization std entries must be positive")

    @property
    def d_in(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def forward(self, x) -> np.ndarray:
        return forward(self, x)

    def normalized_output(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d_in,):
            raise ContractViolation(f"expected {self.d_in} inputs, got shape {x.shape}")
        xn = (x - self.input_mean) / self.input_std
        return np.tanh(xn @ self.w1.T + self.b1) @ self.w2 + self.b2

    def copy(self) -> "MlpModel":
        return MlpModel.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "dims": self.d_in,
            "hidden": self.hidden,
            "activation": self.activation,
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2,
            "input_norm": {"mean": self.input_mean.tolist(), "std": self.input_std.tolist()},
            "target_norm": {"mean": self.target_mean, "std": self.target_std},
            "transform": self.transform.to_dict(),
            "training": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        try:
            m = cls(d["kind"], d["w1"], d["b1"], d["w2"], d["b2"],
                    d["input_norm"]["mean"], d["input_norm"]["std"],
                    d["target_norm"]["mean"], d["target_norm"]["std"],
                    SignedLog.from_dict(d["transform"]), d.get("activation", "tanh"),
                    dict(d.get("training", {})))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad model file: missing or malformed {exc}") from None
        if m.d_in != d.get("dims", m.d_in) or m.hidden != d.get("hidden", m.hidden):
            raise ParseError("model header dims/hidden disagree with the weights")
        return m

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad model file: {exc}") from None


def forward(m: MlpModel, x) -> np.ndarray:
    """Output current in amperes for voltage vectors ``x`` of shape (..., D)."""
    y = m.normalized_output(x) * m.target_std + m.target_mean
    return m.transform.inverse(y)


@dataclass
class Gradient:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def as_list(self) -> list:
        return [self.w1, self.b1, self.w2, np.asarray(self.b2)]


def loss(m: MlpModel, x, y_target) -> float:
    """Mean squared error in normalized target space."""
    r = m.normalized_output(np.atleast_2d(x)) - np.asarray(y_target, dtype=float).reshape(-1)
    return float(np.mean(r * r))


def gradient(m: MlpModel, x, y_target) -> Gradient:
    """Backpropagated gradient of :func:`loss` (``y_target`` is in normalized space)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != m.d_in:
        raise ContractViolation(f"expected {m.d_in} inputs, got {x.shape[1]}")
    xn = (x - m.input_mean) / m.input_std
    return _grad_normalized(m.w1, m.b1, m.w2, m.b2, xn, np.asarray(y_target, dtype=float).reshape(-1))[0]


def _grad_normalized(w1, b1, w2, b2, xn, yn):
    h = np.tanh(xn @ w1.T + b1)
    r = h @ w2 + b2 - yn
    d = 2.0 * r / len(yn)
    dh = np.outer(d, w2) * (1.0 - h * h)
    return Gradient(dh.T @ xn, dh.sum(axis=0), h.T @ d, float(d.sum())), float(np.mean(r * r))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 10000
    batch_size: int | None = None
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    final_lr_fraction: float = 0.1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 < self.final_lr_fraction <= 1:
            raise ConfigError("final_lr_fraction must lie in (0, 1]")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {"learning_rate": self.learning_rate, "epochs": self.epochs, "batch_size": self.batch_size,
                "seed": self.seed, "final_lr_fraction": self.final_lr_fraction, "optimizer": {"name": "adam", "beta1": self.beta1, "beta2": self.beta2,
                                                 "eps": self.eps}, "init": "uniform_inv_sqrt_fan_in"}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        opt = d.get("optimizer", {})
        return cls(d.get("learning_rate", 1e-2), d.get("epochs", 10000), d.get("batch_size"),
                   d.get("seed", 0), opt.get("beta1", 0.9), opt.get("beta2", 0.999), opt.get("eps", 1e-8),
                   d.get("final_lr_fraction", 0.1))


def _stats(a: np.ndarray, axis=0):
    mean = a.mean(axis=axis)
    std = a.std(axis=axis)
    return mean, np.where(std > 0, std, 1.0)


def train(data: Dataset, hidden: int, cfg: TrainConfig | None = None) -> MlpModel:
    """Fit a ``hidden``-unit network to ``data`` with Adam; deterministic in ``cfg.seed``."""
    cfg = TrainConfig() if cfg is None else cfg
    if hidden < 1:
        raise ContractViolation("hidden must be >= 1")
    if len(data) == 0:
        raise ConfigError("cannot train on an empty dataset")
    x, y = data.inputs, data.targets
    x_mean, x_std = _stats(x)
    y_mean, y_std = _stats(y)
    xn = (x - x_mean) / x_std
    yn = (y - y_mean) / y_std
    d = x.shape[1]
    rng = np.random.default_rng(cfg.seed)
    lim1, lim2 = 1 / math.sqrt(d), 1 / math.sqrt(hidden)
    params = [rng.uniform(-lim1, lim1, (hidden, d)), rng.uniform(-lim1, lim1, hidden),
              rng.uniform(-lim2, lim2, hidden), np.asarray(rng.uniform(-lim2, lim2))]
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    batch = len(y) if cfg.batch_size is None else min(cfg.batch_size, len(y))
    first_loss = None
    history = []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        # exponential decay from learning_rate to learning_rate * final_lr_fraction
        lr = cfg.learning_rate * cfg.final_lr_fraction ** ((epoch - 1) / max(cfg.epochs - 1, 1))
        order = np.arange(len(y)) if batch == len(y) else rng.permutation(len(y))
        for start in range(0, len(y), batch):
            idx = order[start:start + batch]
            g, _ = _grad_normalized(params[0], params[1], params[2], float(params[3]), xn[idx], yn[idx])
            step += 1
            c1, c2 = 1 - cfg.beta1 ** step, 1 - cfg.beta2 ** step
            for p, a, b, gp in zip(params, m1, m2, g.as_list()):
                a *= cfg.beta1
                a += (1 - cfg.beta1) * gp
                b *= cfg.beta2
                b += (1 - cfg.beta2) * gp * gp
                p -= lr * (a / c1) / (np.sqrt(b / c2) + cfg.eps)
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            h = np.tanh(xn @ params[0].T + params[1])
            mse = float(np.mean((h @ params[2] + params[3] - yn) ** 2))
        if not math.isfinite(mse) or not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingError(f"training diverged at epoch {epoch}", epoch)
        if first_loss is None:
            first_loss = mse
        history.append(mse)
    meta = {"seed": cfg.seed, "epochs": cfg.epochs, "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size, "first_loss": first_loss, "final_loss": history[-1],
            "train_rows": len(y)}
    return MlpModel(data.kind, params[0], params[1], params[2], float(params[3]), x_mean, x_std,
                    float(y_mean), float(y_std), data.transform, meta=meta)


def core_requirement(m: MlpModel) -> int:
    """GPU cores holding one resident model: D x H."""
    if m.hidden < 1 or m.d_in < 1:
        raise ContractViolation("model needs D >= 1 and H >= 1")
    return m.d_in * m.hidden


def core_requirement_dims(d_in: int, hidden: int) -> int:
    if d_in < 1 or hidden < 1:
        raise ContractViolation("D and H must be >= 1")
    return d_in * hidden


def gpu_latency_cycles(d_in: int, hidden: int) -> int:
    """Cycles for one inference: MUL, ADD tree over D+1 terms, tanh, ADD tree over H+1 terms."""
    if d_in < 1 or hidden < 1:
        raise ContractViolation("D and H must be >= 1")
    return 1 + math.ceil(math.log2(d_in + 1)) + 1 + math.ceil(math.log2(hidden + 1))


# ------------------------------------------------------------------ search


@dataclass
class SearchRow:
    hidden: int
    max_e_sim: float
    train_mse: float


@dataclass
class SearchReport:
    kind: CellKind
    threshold: float
    rows: list = field(default_factory=list)
    selected: int | None = None

    def to_csv(self) -> str:
        lines = ["kind,hidden,max_e_sim,train_mse,selected"]
        for r in self.rows:
            lines.append(f"{self.kind.value},{r.hidden},{r.max_e_sim!r},{r.train_mse!r},"
                         f"{int(r.hidden == self.selected)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SearchSetup:
    """Everything the architecture search needs besides the cell kind."""

    samples: int = 500
    train_fraction: float = 0.9
    data_seed: int = 0
    rail_fraction: float = DEFAULT_RAIL_FRACTION
    suite_size: int = 20
    suite_seed: int = 1
    horizon: float = 10e-12
    train: TrainConfig = field(default_factory=TrainConfig)
    transform: SignedLog = field(default_factory=SignedLog)


def architecture_search(kind, tech: TechnologyParams, sizes=SEARCH_SIZES, noisy_suite=None,
                        threshold: float = 0.01, setup: SearchSetup | None = None, sim_cfg=None,
                        data: Dataset | None = None):
    """Smallest hidden width whose single-cell transient stays under ``threshold`` E_sim.

    Candidates are trained in ascending order; each is simulated on every
    stimulus of ``noisy_suite`` and graded by the worst E_sim against the
    analytic reference.  Returns ``(model, report)``.
    """
    from . import engine
    from .metrics import e_sim

    kind = CellKind.parse(kind)
    setup = SearchSetup() if setup is None else setup
    sizes = list(sizes)
    if not sizes or sizes != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise ConfigError("sizes must be non-empty and strictly ascending")
    sim_cfg = engine.SimConfig(horizon=setup.horizon) if sim_cfg is None else sim_cfg
    cell = engine.single_cell_circuit(kind)
    if noisy_suite is None:
        spec = engine.NoiseSpec(inputs=tuple(cell.primary_inputs), v_dd=tech.v_dd, dT=sim_cfg.dT,
                                horizon=sim_cfg.horizon)
        noisy_suite = engine.generate_noisy_inputs(setup.suite_size, setup.suite_seed, spec)
    if len(noisy_suite) == 0:
        raise ConfigError("noisy suite is empty")
    if data is None:
        full = sample_dataset(kind, tech, setup.samples, setup.data_seed, setup.transform,
                              setup.rail_fraction)
        data, _ = split_dataset(full, setup.train_fraction, setup.data_seed)
    refs = engine.simulate_suite(cell, noisy_suite, sim_cfg, tech, reference=True)
    report = SearchReport(kind, threshold)
    for h in sizes:
        model = train(data, h, setup.train)
        tests = engine.simulate_suite(cell, noisy_suite, sim_cfg.with_(backend="nn"), tech,
                                      models={kind: model})
        worst = max(e_sim(r.waveform("out"), t.waveform("out"), tech.v_dd) for r, t in zip(refs, tests))
        report.rows.append(SearchRow(h, worst, model.meta["final_loss"]))
        if worst < threshold:
            report.selected = h
            model.meta["search"] = {"max_e_sim": worst, "threshold": threshold}
            return model, report
    raise SearchFailure(f"no hidden size in {sizes[0]}..{sizes[-1]} reached E_sim < {threshold:g} "
                        f"for {kind.value}", report)
