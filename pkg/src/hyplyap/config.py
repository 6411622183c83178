"""Flat ``key = value`` run configurations, presets and run assembly."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np

from .errors import ConfigError, InvalidParameterError
from .model import (ExponentialWeights, FeedbackMatrix, GridSpec, StateField, SystemCoefficients,
                    _disturbance_window, build_grid, linear_example, realize_weights, separable_forcing, zero_forcing)
from . import saint_venant as sv

MODELS = ("linear2x2", "saint-venant", "custom-table")
TIMINGS = ("post", "pre")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _slope(text: str):
    return "balanced" if text.strip().lower() == "balanced" else float(text)


# key -> (converter, attribute name)
KEYS: Dict[str, tuple] = {
    "model": (str, "model"),
    "J": (_int, "J"),
    "cfl": (float, "cfl"),
    "T": (float, "T"),
    "l": (float, "l"),
    "xi": (float, "xi"),
    "mu": (float, "mu"),
    "p1": (float, "p1"),
    "p2": (float, "p2"),
    "k12": (float, "k12"),
    "k21": (float, "k21"),
    "amp": (float, "amp"),
    "t-stop": (float, "t_stop"),
    "w1-init": (float, "w1_init"),
    "w2-init": (float, "w2_init"),
    "rain-amp": (float, "rain_amp"),
    "g": (float, "g"),
    "cf": (float, "cf"),
    "sb": (_slope, "sb"),
    "h-star": (float, "h_star"),
    "u-star": (float, "u_star"),
    "h-init": (float, "h_init"),
    "v-amp": (float, "v_amp"),
    "kappa0": (float, "kappa0"),
    "kappal": (float, "kappal"),
    "boundary-timing": (str, "boundary_timing"),
    "friction-with-g": (_bool, "friction_with_g"),
    "strict": (_bool, "strict"),
    "record-stride": (_int, "record_stride"),
    "out": (str, "out"),
    "table": (str, "table"),
}


@dataclass
class RunConfig:
    model: str = "linear2x2"
    J: int = 1600
    cfl: float = 0.75
    T: float = 10.0
    l: float = 1.0
    xi: float = 0.125
    mu: Optional[float] = None
    p1: Optional[float] = None
    p2: Optional[float] = None
    k12: Optional[float] = None
    k21: Optional[float] = None
    amp: float = 0.01
    t_stop: float = 5.0
    w1_init: float = -0.5
    w2_init: float = 0.5
    rain_amp: float = 0.25
    g: float = sv.G
    cf: float = 0.1
    sb: Any = "balanced"
    h_star: float = 2.0
    u_star: float = 3.0
    h_init: float = 2.5
    v_amp: float = 4.0
    kappa0: Optional[float] = None
    kappal: Optional[float] = None
    boundary_timing: str = "post"
    friction_with_g: bool = False
    strict: bool = False
    record_stride: int = 1
    out: Optional[str] = None
    table: Optional[str] = None
    preset: Optional[str] = None
    explicit: set = field(default_factory=set, repr=False)

    def resolved(self, name: str):
        """Value of ``name`` with the per-model default filled in."""
        value = getattr(self, name)
        if value is not None:
            return value
        return MODEL_DEFAULTS[self.model][name]


MODEL_DEFAULTS = {
    "linear2x2": {"mu": 0.575, "p1": 1.0, "p2": 1.0, "k12": 0.5, "k21": 0.5},
    "custom-table": {"mu": 0.575, "p1": 1.0, "p2": 1.0, "k12": 0.5, "k21": 0.5},
    # p1/p2 None -> gamma21 / gamma12 of the linearisation
    "saint-venant": {"mu": 0.1, "p1": None, "p2": None, "k12": 0.75, "k21": 0.75},
}

PRESETS = {
    "linear-4.1": "model = linear2x2\n",
    "sv-4.2": "model = saint-venant\n",
}


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a validated config."""
    cfg = base if base is not None else RunConfig()
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            unknown.append((lineno, key))
            continue
        if value == "":
            raise ConfigError("missing value", line=lineno, key=key)
        convert, attr = KEYS[key]
        try:
            setattr(cfg, attr, convert(value))
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, key=key) from None
        cfg.explicit.add(attr)
    if unknown:
        listing = ", ".join(f"'{k}' (line {n})" for n, k in unknown)
        raise ConfigError(f"unknown keys: {listing}")
    validate(cfg)
    return cfg


def load_config(path: Optional[str] = None, preset: Optional[str] = None) -> RunConfig:
    cfg = RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}'; choose from {sorted(PRESETS)}")
        cfg = parse_config(PRESETS[preset], cfg)
        cfg.preset = preset
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = parse_config(text, cfg)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}", key="model")
    if cfg.J < 2:
        raise ConfigError("J must be >= 2", key="J")
    if not 0 < cfg.cfl <= 1:
        raise ConfigError("cfl must lie in (0, 1]", key="cfl")
    for attr in ("T", "l", "xi", "g", "h_star", "h_init"):
        if not getattr(cfg, attr) > 0:
            raise ConfigError("must be positive", key=attr)
    for attr in ("mu", "p1", "p2"):
        v = getattr(cfg, attr)
        if v is not None and not v > 0:
            raise ConfigError("must be positive", key=attr)
    if cfg.amp < 0 or cfg.rain_amp < 0:
        raise ConfigError("disturbance amplitude must be non-negative", key="amp")
    if cfg.boundary_timing not in TIMINGS:
        raise ConfigError(f"boundary-timing must be one of {TIMINGS}", key="boundary-timing")
    if cfg.record_stride < 1:
        raise ConfigError("record-stride must be >= 1", key="record-stride")
    if cfg.model == "custom-table" and not cfg.table:
        raise ConfigError("model custom-table needs a 'table' file", key="table")


@dataclass
class RunSetup:
    """Everything :func:`hyplyap.solver.simulate` needs, plus reporting context."""

    label: str
    grid: GridSpec
    coeffs: SystemCoefficients
    K: FeedbackMatrix
    W0: StateField
    weights: np.ndarray
    xi: float
    mu: float
    speeds: Callable = field(repr=False)
    source: Callable = field(repr=False)
    weight_fn: Callable = field(repr=False)


def _exp_weight_fn(p1, p2, mu):
    return lambda x: np.array([p1 * math.exp(-mu * x), p2 * math.exp(mu * x)])


def _interp_fns(coeffs: SystemCoefficients, grid: GridSpec):
    xe, xc = grid.x_ext, grid.x

    def speeds(x):
        return np.array([np.interp(x, xe, coeffs.lambda_plus[:, 0]),
                         -np.interp(x, xe, coeffs.lambda_minus[:, 0])])

    def source(x):
        return np.array([[np.interp(x, xc, coeffs.pi[:, a, b]) for b in range(2)] for a in range(2)])

    return speeds, source


def build_run(cfg: RunConfig) -> RunSetup:
    """Assemble grid, coefficients, feedback, initial state and weights."""
    mu = cfg.resolved("mu")
    k12, k21 = cfg.resolved("k12"), cfg.resolved("k21")
    if cfg.model == "linear2x2":
        p1, p2 = cfg.resolved("p1"), cfg.resolved("p2")
        grid, coeffs, K, W0 = linear_example(cfg.J, cfg.cfl, cfg.T, k12, k21, cfg.amp, l=cfg.l,
                                             f=cfg.w1_init, g=cfg.w2_init, t_stop=cfg.t_stop)
        weights = realize_weights(ExponentialWeights([p1], [p2], mu), grid, 2, 1)
        speeds, source = (lambda x: np.array([1.0, -1.0])), (lambda x: np.zeros((2, 2)))
        label = "linear2x2"
    elif cfg.model == "saint-venant":
        sb = cfg.sb
        if sb == "balanced":
            sb = sv.balanced_slope(cfg.h_star, cfg.u_star, cfg.cf, cfg.g, cfg.friction_with_g)
        model = sv.SaintVenantModel(g=cfg.g, cf=cfg.cf, sb=sb, friction_with_g=cfg.friction_with_g)
        if cfg.kappa0 is not None or cfg.kappal is not None:
            if cfg.kappa0 is None or cfg.kappal is None:
                raise ConfigError("kappa0 and kappal must be given together", key="kappa0")
            # constant steady state is assumed for the boundary depths
            k12, k21 = sv.physical_feedback_to_k(cfg.kappa0, cfg.kappal, cfg.h_star, cfg.h_star, cfg.g)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            exp = sv.sv_experiment(cfg.J, cfg.cfl, cfg.T, mu, cfg.xi, k12, k21, model=model,
                                   h_star=cfg.h_star, u_star=cfg.u_star, rain_amp=cfg.rain_amp,
                                   t_stop=cfg.t_stop, h_init=cfg.h_init, v_amp=cfg.v_amp,
                                   p1=cfg.p1, p2=cfg.p2, l=cfg.l)
        grid, coeffs, K, W0, weights = exp.grid, exp.coeffs, exp.K, exp.W0, exp.weights
        p1, p2 = exp.weights_spec.p_plus[0], exp.weights_spec.p_minus[0]
        speeds, source = _interp_fns(coeffs, grid)
        label = "saint-venant"
    else:
        p1, p2 = cfg.resolved("p1"), cfg.resolved("p2")
        grid, coeffs, K, W0 = custom_table_run(cfg, k12, k21)
        weights = realize_weights(ExponentialWeights([p1], [p2], mu), grid, 2, 1)
        speeds, source = _interp_fns(coeffs, grid)
        label = f"custom-table:{cfg.table}"
    return RunSetup(label=label, grid=grid, coeffs=coeffs, K=K, W0=W0, weights=weights, xi=cfg.xi,
                    mu=mu, speeds=speeds, source=source, weight_fn=_exp_weight_fn(p1, p2, mu))


TABLE_COLUMNS = ("x", "lambda1", "lambda2", "gamma11", "gamma12", "gamma21", "gamma22")


def read_coefficient_table(path: str) -> Dict[str, np.ndarray]:
    """Read a CSV with columns x, lambda1, lambda2, gamma11, gamma12, gamma21, gamma22."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.DictReader(line for line in fh if not line.startswith("#"))]
    except OSError as exc:
        raise ConfigError(f"cannot read coefficient table: {exc}", key="table") from None
    if not rows:
        raise ConfigError("coefficient table is empty", key="table")
    missing = [c for c in TABLE_COLUMNS if c not in rows[0]]
    if missing:
        raise ConfigError(f"coefficient table lacks columns {missing}", key="table")
    try:
        data = {c: np.array([float(r[c]) for r in rows]) for c in TABLE_COLUMNS}
    except ValueError as exc:
        raise ConfigError(f"bad number in coefficient table: {exc}", key="table") from None
    if np.any(np.diff(data["x"]) <= 0):
        raise ConfigError("table x column must be strictly increasing", key="table")
    return data


def custom_table_run(cfg: RunConfig, k12: float, k21: float):
    data = read_coefficient_table(cfg.table)
    l = cfg.l
    J = cfg.J
    dx = l / J
    x_ext = (np.arange(-1, J + 1) + 0.5) * dx
    lam1 = np.interp(x_ext, data["x"], data["lambda1"])
    lam2 = np.interp(x_ext, data["x"], data["lambda2"])
    if np.any(lam1 <= 0) or np.any(lam2 >= 0):
        raise ConfigError("lambda1 must be positive and lambda2 negative everywhere", key="table")
    grid = build_grid(l, J, cfg.T, cfg.cfl, float(max(lam1.max(), (-lam2).max())))
    x = grid.x
    pi = np.empty((J, 2, 2))
    for a in range(2):
        for b in range(2):
            pi[:, a, b] = np.interp(x, data["x"], data[f"gamma{a + 1}{b + 1}"])
    if cfg.amp == 0:
        forcing = zero_forcing(J, 2)
    else:
        forcing = separable_forcing(np.tile([1.0, -1.0], (J, 1)), _disturbance_window(cfg.amp, cfg.t_stop))
    coeffs = SystemCoefficients(k=2, m=1, lambda_plus=lam1[:, None], lambda_minus=(-lam2)[:, None],
                                pi=pi, forcing=forcing)
    K = FeedbackMatrix.from_gains(k12, k21)
    from .solver import apply_boundary
    w0 = np.column_stack([np.full(J, cfg.w1_init), np.full(J, cfg.w2_init)])
    return grid, coeffs, K, apply_boundary(StateField(w0, m=1), K)
