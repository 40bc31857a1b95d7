"""Scenario runner behind the command-line tool.

A scenario is a parameter set, a time grid and a choice of model.  Running
it produces a table of Fisher informations (and, for the bath model, the
two GKSL rates) written as CSV.  Each named scenario ships with its own
default parameter set.
"""

from __future__ import annotations

import configparser
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .dyne import (general_dyne_cfi, homodyne_cfi, maximize_over_time, optimize_dyne_batch,
                   optimize_dyne_markovian)
from .errors import ConfigError, GaussFisherError, NumericFailure
from .markovian import SystemParams, moments_on_grid
from .gaussian import coherent_state
from .qbm import QbmParams, qbm_derivatives, rates
from .qfi import qfi_gaussian_batch, qfi_markovian

WORKERS_ENV = "GAUSSFISHER_MAX_WORKERS"

COLUMNS = ("t", "qfi", "cfi_homodyne_q", "cfi_homodyne_p", "cfi_heterodyne",
           "cfi_optimal", "z_optimal", "rate_plus", "rate_minus")
GAP_COLUMNS = ("beta_I", "qfi_opt_over_t", "cfi_opt_over_t", "relative_gap")
REPORT_COLUMNS = ("quantity", "analytic", "oracle", "rel_error", "tolerance", "pass")

SYSTEM_KEYS = ("omega", "beta_mod", "beta_arg", "alpha_mod", "alpha_arg", "gamma", "n_th")
BATH_KEYS = ("xi", "lambda_c", "temp_ratio")
PARAM_KEYS = SYSTEM_KEYS + BATH_KEYS
CARTESIAN_KEYS = ("beta_re", "beta_im", "beta_I", "alpha_re", "alpha_im")


class Scenario(str, Enum):
    FIG1A = "fig1a"
    FIG1B = "fig1b"
    FIG2 = "fig2"
    FIG3A = "fig3a"
    FIG3B = "fig3b"
    FIG4 = "fig4"
    FIG_OPTDYNE = "fig_optdyne"
    FIG5_GAP = "fig5_gap"
    FIG6_QBM_DYNE = "fig6_qbm_dyne"
    VERIFY = "verify"
    CUSTOM = "custom"


class Model(str, Enum):
    MARKOVIAN = "markovian"
    QBM = "qbm"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    params: Mapping[str, float] = field(default_factory=dict)
    t_start: float = 0.0
    t_end: float = 10.0
    t_steps: int = 2000
    sweep: tuple[str, tuple[float, ...]] | None = None
    output_path: str | None = None
    model: Model = Model.MARKOVIAN
    mean_decay: str = "half"
    exact_noise: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "scenario", Scenario(self.scenario))
        except ValueError:
            raise ConfigError(f"scenario: unknown scenario {self.scenario!r}") from None
        try:
            object.__setattr__(self, "model", Model(self.model))
        except ValueError:
            raise ConfigError(f"model: must be 'markovian' or 'qbm', got {self.model!r}") from None
        for key, value in self.params.items():
            if key not in PARAM_KEYS:
                raise ConfigError(f"{key}: unknown parameter")
            if not math.isfinite(value):
                raise ConfigError(f"{key}: must be finite, got {value}")
        object.__setattr__(self, "params", dict(self.params))
        if not (math.isfinite(self.t_start) and self.t_start >= 0):
            raise ConfigError(f"t_start: must be finite and >= 0, got {self.t_start}")
        if not (math.isfinite(self.t_end) and self.t_end > self.t_start):
            raise ConfigError(f"t_end: must be finite and > t_start, got {self.t_end}")
        if int(self.t_steps) != self.t_steps or self.t_steps < 2:
            raise ConfigError(f"t_steps: must be an integer >= 2, got {self.t_steps}")
        object.__setattr__(self, "t_steps", int(self.t_steps))
        if self.mean_decay not in ("half", "full"):
            raise ConfigError(f"mean_decay: must be 'half' or 'full', got {self.mean_decay!r}")
        if self.sweep is not None:
            name, values = self.sweep
            if name not in PARAM_KEYS + CARTESIAN_KEYS:
                raise ConfigError(f"sweep_field: unknown parameter {name!r}")
            values = tuple(float(v) for v in values)
            if not values or not all(math.isfinite(v) for v in values):
                raise ConfigError("sweep_values: must be a non-empty list of finite numbers")
            object.__setattr__(self, "sweep", (name, values))

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.t_steps)


# --- defaults -----------------------------------------------------------------

_FIG1 = dict(omega=2.1, beta_mod=0.5, beta_arg=-math.pi / 2, alpha_mod=1.0,
             alpha_arg=math.pi / 2, gamma=0.0, n_th=0.0)
_NON_MARKOVIAN = dict(omega=7.0, xi=0.3, lambda_c=1.0, temp_ratio=1000.0,
                      alpha_mod=0.1, alpha_arg=0.0)
_OPTDYNE = dict(omega=2.1, beta_mod=abs(0.3 - 0.5j), beta_arg=math.atan2(-0.5, 0.3),
                alpha_mod=1.0, alpha_arg=math.pi / 2, gamma=0.05, n_th=0.1)

DEFAULTS: dict[Scenario, dict] = {
    Scenario.FIG1A: dict(params=_FIG1, t_end=80.0, sweep=("beta_mod", (0.0, 0.5))),
    Scenario.FIG1B: dict(params={**_FIG1, "gamma": 0.05}, t_end=80.0,
                         sweep=("beta_mod", (0.0, 0.5))),
    Scenario.FIG2: dict(params=_NON_MARKOVIAN, t_end=10.0, model=Model.QBM),
    Scenario.FIG3A: dict(params={**_NON_MARKOVIAN, "omega": 1.0, "lambda_c": 2.0},
                         t_end=10.0, model=Model.QBM),
    Scenario.FIG3B: dict(params=_NON_MARKOVIAN, t_end=10.0, model=Model.QBM),
    Scenario.FIG4: dict(params=dict(omega=5.0, beta_mod=0.2, beta_arg=0.0, alpha_mod=0.025,
                                    alpha_arg=0.0, gamma=0.07, n_th=0.4, xi=0.3,
                                    lambda_c=1.0, temp_ratio=4.0), t_end=20.0),
    Scenario.FIG_OPTDYNE: dict(params=_OPTDYNE, t_end=60.0),
    Scenario.FIG5_GAP: dict(params={**_OPTDYNE, "beta_mod": 0.0, "beta_arg": 0.0},
                            t_end=80.0, t_steps=80001,
                            sweep=("beta_I", (0.0, 0.1, 0.2, 0.3, 0.4, 0.5))),
    Scenario.FIG6_QBM_DYNE: dict(params=_NON_MARKOVIAN, t_end=10.0, model=Model.QBM),
    Scenario.VERIFY: dict(),
    Scenario.CUSTOM: dict(params={**_FIG1, "gamma": 0.05, "n_th": 0.0}, t_end=10.0),
}


def set_param(params: dict, key: str, value: float) -> dict:
    """Return ``params`` with one entry changed; Cartesian keys update the polar pair."""
    out = dict(params)
    value = float(value)
    if key in PARAM_KEYS:
        out[key] = value
        return out
    if key not in CARTESIAN_KEYS:
        raise ConfigError(f"{key}: unknown parameter")
    name = "beta" if key.startswith("beta") else "alpha"
    current = out.get(f"{name}_mod", 0.0) * np.exp(1j * out.get(f"{name}_arg", 0.0))
    if key == "beta_I":
        current = complex(0.0, -value)
    elif key.endswith("_re"):
        current = complex(value, current.imag)
    else:
        current = complex(current.real, value)
    out[f"{name}_mod"] = abs(current)
    out[f"{name}_arg"] = float(np.angle(current)) if current else 0.0
    return out


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def read_config_file(path: str) -> list[tuple[str, str]]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[scenario]\n" + fh.read(), source=path)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    return list(parser.items("scenario"))


def parse_overrides(items: Iterable[str]) -> list[tuple[str, str]]:
    out = []
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set: expected key=value, got {item!r}")
        out.append((key.strip(), value.strip()))
    return out


def build_config(
    scenario: str,
    config_path: str | None = None,
    overrides: Sequence[str] = (),
    output_path: str | None = None,
) -> ScenarioConfig:
    """Built-in defaults, then the config file, then ``--set`` overrides."""
    try:
        scenario = Scenario(scenario)
    except ValueError:
        names = ", ".join(s.value for s in Scenario)
        raise ConfigError(f"scenario: unknown scenario {scenario!r} (choose from {names})") from None
    base = dict(DEFAULTS[scenario])
    params = dict(base.pop("params", {}))
    options = dict(base)
    sweep_field, sweep_values = options.pop("sweep", (None, None)) or (None, None)

    pairs = read_config_file(config_path) if config_path else []
    pairs += parse_overrides(overrides)
    for key, text in pairs:
        if key in PARAM_KEYS or key in CARTESIAN_KEYS:
            params = set_param(params, key, _parse_float(key, text))
        elif key in ("t_start", "t_end"):
            options[key] = _parse_float(key, text)
        elif key == "t_steps":
            value = _parse_float(key, text)
            if value != int(value):
                raise ConfigError(f"t_steps: expected an integer, got {text!r}")
            options[key] = int(value)
        elif key == "sweep_field":
            sweep_field = text or None
        elif key == "sweep_values":
            sweep_values = tuple(_parse_float(key, v) for v in text.split(",") if v.strip())
        elif key in ("model", "mean_decay"):
            options[key] = text
        elif key == "exact_noise":
            options[key] = _parse_bool(key, text)
        else:
            raise ConfigError(f"{key}: unknown configuration key")
    sweep = None
    if sweep_field is not None:
        if sweep_values is None:
            raise ConfigError("sweep_values: required when sweep_field is set")
        sweep = (sweep_field, sweep_values)
    return ScenarioConfig(scenario, params, sweep=sweep, output_path=output_path, **options)


def system_params(params: Mapping[str, float]) -> SystemParams:
    try:
        return SystemParams(**{k: params[k] for k in SYSTEM_KEYS if k in params})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def qbm_params(params: Mapping[str, float]) -> QbmParams:
    missing = [k for k in ("omega",) + BATH_KEYS if k not in params]
    if missing:
        raise ConfigError(f"{missing[0]}: required for the bath model")
    try:
        return QbmParams(**{k: params[k] for k in ("omega",) + BATH_KEYS})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --- series ---------------------------------------------------------------------

@dataclass
class FisherSeries:
    """Time series of Fisher informations; unset columns stay ``None``."""

    t: np.ndarray
    qfi: np.ndarray | None = None
    cfi_homodyne_q: np.ndarray | None = None
    cfi_homodyne_p: np.ndarray | None = None
    cfi_heterodyne: np.ndarray | None = None
    cfi_optimal: np.ndarray | None = None
    z_optimal: np.ndarray | None = None
    rate_plus: np.ndarray | None = None
    rate_minus: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing")
        for name in COLUMNS[1:]:
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value, dtype=float)
            if value.shape != self.t.shape:
                raise ValueError(f"{name} has shape {value.shape}, expected {self.t.shape}")
            if name.startswith(("qfi", "cfi")) and np.any(value < 0):
                raise ValueError(f"{name} has negative entries")
            setattr(self, name, value)

    def column(self, name: str):
        return getattr(self, name)

    def rows(self) -> list[list]:
        cols = [getattr(self, name) for name in COLUMNS]
        return [[None if c is None else float(c[k]) for c in cols] for k in range(self.t.size)]


class Table(NamedTuple):
    header: tuple[str, ...]
    rows: list[list]


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {raw!r}") from None


def _map(fn, items: list) -> list:
    """Ordered map, spread over processes when the worker cap allows it."""
    workers = min(_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(len(items) // (4 * workers), 1)))


def _dyne_columns(u, sigma, dsigma) -> dict:
    opt = optimize_dyne_batch(u, sigma, dsigma)
    return dict(cfi_homodyne_q=opt.homodyne_q, cfi_homodyne_p=opt.homodyne_p,
                cfi_heterodyne=opt.heterodyne, cfi_optimal=opt.cfi, z_optimal=opt.z)


def markovian_series(p: SystemParams, t: np.ndarray, dyne: bool = True) -> FisherSeries:
    """QFI and optionally every dyne CFI on a uniform grid (exact exponential stepping)."""
    s0 = p.initial_state()
    grid = moments_on_grid(p, s0, t)
    dcov = grid.dcov if p.beta_mod != 0 else np.zeros_like(grid.dcov)
    cols = dict(qfi=qfi_gaussian_batch(grid.u, grid.cov, dcov))
    if dyne:
        cols.update(_dyne_columns(grid.u, grid.cov, dcov))
    return FisherSeries(t, **cols)


class _QbmPoint(NamedTuple):
    p: QbmParams
    alpha_mod: float
    alpha_arg: float
    mean_decay: str
    exact_noise: bool

    def __call__(self, t: float):
        s0 = coherent_state(self.alpha_mod, self.alpha_arg)
        return qbm_derivatives(self.p, s0, t, mean_decay=self.mean_decay,
                               exact_noise=self.exact_noise)


def qbm_series(
    p: QbmParams,
    alpha_mod: float,
    alpha_arg: float,
    t: np.ndarray,
    fisher: bool = True,
    dyne: bool = True,
    mean_decay: str = "half",
    exact_noise: bool = False,
) -> FisherSeries:
    """Bath-model series: GKSL rates always, QFI and dyne CFIs on request."""
    sample = rates(p, t)
    cols = dict(rate_plus=sample.rate_plus, rate_minus=sample.rate_minus)
    if fisher:
        point = _QbmPoint(p, alpha_mod, alpha_arg, mean_decay, exact_noise)
        derivs = _map(point, [float(x) for x in t])
        u = np.array([d.u for d in derivs])
        sigma = np.array([d.sigma for d in derivs])
        dsigma = np.array([d.dsigma for d in derivs])
        cols["qfi"] = qfi_gaussian_batch(u, sigma, dsigma)
        if dyne:
            cols.update(_dyne_columns(u, sigma, dsigma))
    return FisherSeries(t, **cols)


# --- scenario dispatch -----------------------------------------------------------

def _labelled(cfg: ScenarioConfig, params: Mapping[str, float]):
    """Leading label columns and the series they belong to."""
    t = cfg.t_grid
    sc = cfg.scenario
    qbm_opts = dict(mean_decay=cfg.mean_decay, exact_noise=cfg.exact_noise)
    alpha = (params.get("alpha_mod", 0.0), params.get("alpha_arg", 0.0))

    if sc in (Scenario.FIG1A, Scenario.FIG1B):
        return (), [((), markovian_series(system_params(params), t, dyne=False))]
    if sc is Scenario.FIG_OPTDYNE:
        return (), [((), markovian_series(system_params(params), t))]
    if sc is Scenario.FIG2:
        return (), [((), qbm_series(qbm_params(params), *alpha, t, fisher=False))]
    if sc in (Scenario.FIG3A, Scenario.FIG3B):
        return (), [((), qbm_series(qbm_params(params), *alpha, t, dyne=False, **qbm_opts))]
    if sc is Scenario.FIG6_QBM_DYNE:
        return (), [((), qbm_series(qbm_params(params), *alpha, t, **qbm_opts))]
    if sc is Scenario.FIG4:
        markov = markovian_series(system_params(params), t, dyne=False)
        bath = qbm_series(qbm_params(params), *alpha, t, dyne=False, **qbm_opts)
        bath.rate_plus = bath.rate_minus = None
        return ("model",), [(("markovian_squeezed",), markov), (("qbm",), bath)]
    if sc is Scenario.CUSTOM:
        if cfg.model is Model.QBM:
            return (), [((), qbm_series(qbm_params(params), *alpha, t, **qbm_opts))]
        return (), [((), markovian_series(system_params(params), t))]
    raise ConfigError(f"scenario: {sc.value} does not produce a Fisher series")


def _series_table(cfg: ScenarioConfig, params: Mapping[str, float]) -> Table:
    labels, parts = _labelled(cfg, params)
    rows = [list(lab) + row for lab, series in parts for row in series.rows()]
    return Table(labels + COLUMNS, rows)


def time_maximized_gap(p: SystemParams, t: np.ndarray) -> tuple[float, float, float]:
    """Time-maximised QFI, time-maximised dyne-optimal CFI and their relative gap.

    Grid maxima are refined by golden section on the quadrature pipeline.  The
    dyne optimisation is skipped wherever the QFI already lies below the best
    limit-setting CFI on the grid, since no measurement can exceed the QFI.
    """
    s0 = p.initial_state()
    grid = moments_on_grid(p, s0, t)
    dcov = grid.dcov if p.beta_mod != 0 else np.zeros_like(grid.dcov)
    qfi = qfi_gaussian_batch(grid.u, grid.cov, dcov)

    limits = np.maximum.reduce([homodyne_cfi(grid.u, grid.cov, dcov, 0),
                                homodyne_cfi(grid.u, grid.cov, dcov, 1),
                                general_dyne_cfi(grid.u, grid.cov, dcov, 1.0)])
    cfi = limits.copy()
    candidates = qfi >= limits.max()
    if np.any(candidates):
        opt = optimize_dyne_batch(grid.u[candidates], grid.cov[candidates], dcov[candidates])
        cfi[candidates] = opt.cfi

    _, qfi_max = maximize_over_time(t, qfi, lambda s: qfi_markovian(p, s, s0).qfi)
    _, cfi_max = maximize_over_time(t, cfi, lambda s: optimize_dyne_markovian(p, s, s0).cfi)
    cfi_max = min(cfi_max, qfi_max)
    return qfi_max, cfi_max, (qfi_max - cfi_max) / qfi_max


class _SweepPoint(NamedTuple):
    cfg: ScenarioConfig

    def __call__(self, value: float) -> Table:
        name, _ = self.cfg.sweep
        params = set_param(self.cfg.params, name, value)
        if self.cfg.scenario is Scenario.FIG5_GAP:
            qmax, cmax, gap = time_maximized_gap(system_params(params), self.cfg.t_grid)
            return Table(GAP_COLUMNS, [[value, qmax, cmax, gap]])
        return _series_table(self.cfg, params)


def sweep(cfg: ScenarioConfig) -> Table:
    """One block of rows per sweep value, led by the swept value.

    ``fig5_gap`` collapses each block to a single row of time-maximised
    Fisher informations.
    """
    if cfg.sweep is None:
        raise ConfigError("sweep_field: no sweep configured")
    name, values = cfg.sweep
    tables = _map(_SweepPoint(cfg), list(values))
    if cfg.scenario is Scenario.FIG5_GAP:
        if name != "beta_I":
            raise ConfigError("sweep_field: fig5_gap sweeps beta_I")
        return Table(GAP_COLUMNS, [row for tab in tables for row in tab.rows])
    header = (name,) + tables[0].header
    return Table(header, [[v] + row for v, tab in zip(values, tables) for row in tab.rows])


def verification_table() -> Table:
    from .oracle import run_verification
    rows = [[r.quantity, r.analytic, r.oracle, r.rel_error, r.tolerance, r.passed]
            for r in run_verification()]
    return Table(REPORT_COLUMNS, rows)


def run_scenario(cfg: ScenarioConfig) -> Table:
    """Evaluate the scenario and write the CSV to ``cfg.output_path`` if set."""
    try:
        if cfg.scenario is Scenario.VERIFY:
            table = verification_table()
        elif cfg.sweep is not None:
            table = sweep(cfg)
        elif cfg.scenario is Scenario.FIG5_GAP:
            raise ConfigError("sweep_field: fig5_gap needs a beta_I sweep")
        else:
            table = _series_table(cfg, cfg.params)
    except ConfigError:
        raise
    except (GaussFisherError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        raise NumericFailure(f"{cfg.scenario.value}: {type(exc).__name__}: {exc}") from exc
    if cfg.output_path:
        write_csv(cfg.output_path, table)
    return table


# --- CSV ----------------------------------------------------------------------------

def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return ""
    return format(value, ".17g")


def write_csv(path: str, table: Table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([format_value(v) for v in row])


def read_csv(path: str) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        return Table(header, [row for row in reader])
