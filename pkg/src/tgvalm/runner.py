"""Run configuration, solver dispatch, trace CSV and comparison tables."""

from __future__ import annotations

import csv
import dataclasses
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imageio
from .alm import ALMConfig, ALMFailure, alm_run
from .metrics import primal_energy, psnr, rmse, ssim
from .primal_dual import alg2_run
from .ssn import InnerConfig, PrimalDualState

SOLVERS = ("alm-pdp", "alm-pdd", "alg2")
TRACE_COLUMNS = ("k", "res_u", "res_w", "res_lambda", "res_mu", "gap", "U", "n_ssn", "n_bicg_avg", "wall_ms")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: str = ""
    output: str | None = None
    solver: str = "alm-pdp"
    alpha1: float = 0.1
    alpha0: float = 0.05
    a: float = 1.0
    noise_percent: float | None = None
    noise_std: float | None = None
    seed: int = 0
    sigma0: float = 4.0
    sigma_growth: float = 4.0
    sigma_max: float = 4.0 ** 10
    delta: float = 1e-3
    tol: float = 1e-6
    trace: str | None = None
    max_outer: int = 30
    max_iters: int = 1_000_000
    check_every: int = 10
    line_search: bool = False
    clean_ref: str | None = None
    time_budget: float = 1e4
    timing: bool = True
    label: str | None = None

    def __post_init__(self):
        if not self.input:
            raise ConfigError("an input image is required")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {', '.join(SOLVERS)}; got {self.solver!r}")
        for name in ("alpha1", "alpha0", "a", "sigma0", "delta", "tol", "time_budget"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name.replace('_', '-')} must be positive")
        if not self.sigma_growth > 1:
            raise ConfigError("sigma-growth must exceed 1")
        if self.noise_percent is not None and not self.noise_percent > 0:
            raise ConfigError("noise-percent must be positive")
        if self.noise_std is not None and not self.noise_std > 0:
            raise ConfigError("noise-std must be positive")
        if self.max_outer < 1 or self.max_iters < 1 or self.check_every < 1:
            raise ConfigError("iteration limits must be positive")

    @property
    def name(self) -> str:
        return self.label or self.solver.upper()


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw):
    f = _FIELDS[key]
    if raw is None or not isinstance(raw, str):
        return raw
    kind = str(f.type)
    try:
        if "bool" in kind:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind.startswith("int"):
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, keys accept ``-`` or ``_``."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def build_config(file: str | None = None, **overrides) -> RunConfig:
    """Config file values, then non-``None`` overrides on top."""
    values = {}
    if file:
        try:
            values.update(parse_config_text(Path(file).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {file}: {exc}") from None
    values.update({k: _coerce(k, v) for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# -- inputs -----------------------------------------------------------------

def load_input(source: str) -> np.ndarray:
    """Load a PGM path or a ``synth:KIND[:SIZE]`` synthetic image."""
    if source.startswith("synth:"):
        parts = source.split(":")
        try:
            size = int(parts[2]) if len(parts) > 2 else 64
            return imageio.synthetic_image(parts[1], size)
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"bad synthetic input {source!r}: {exc}") from None
    try:
        return imageio.load_image(source)
    except OSError as exc:
        raise ConfigError(f"cannot read input {source}: {exc}") from None
    except imageio.PGMError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def prepare_data(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray | None]:
    """Returns ``(f, clean)``; with noise requested the input doubles as the clean reference."""
    img = load_input(cfg.input)
    clean = load_input(cfg.clean_ref) if cfg.clean_ref else None
    if cfg.noise_percent is not None or cfg.noise_std is not None:
        f = imageio.add_gaussian_noise(img, cfg.noise_percent, cfg.seed, std=cfg.noise_std)
        if clean is None:
            clean = img
    else:
        f = img
    if clean is not None and clean.shape != f.shape:
        raise ConfigError(f"clean reference shape {clean.shape} differs from input {f.shape}")
    if not np.any(f):
        raise ConfigError("input image is identically zero")
    return f, clean


# -- running ------------------------------------------------------------------

@dataclass
class RunOutcome:
    config: RunConfig
    x: PrimalDualState
    status: str
    iterations: int
    seconds: float
    trace: list = field(default_factory=list)
    f: np.ndarray | None = None
    clean: np.ndarray | None = None
    error: str | None = None

    @property
    def final(self):
        return self.trace[-1] if self.trace else None

    def quality(self) -> dict | None:
        if self.clean is None:
            return None
        return {"psnr": psnr(self.x.u, self.clean), "rmse": rmse(self.x.u, self.clean),
                "ssim": ssim(self.x.u, self.clean)}

    def energy(self) -> float:
        c = self.config
        return primal_energy(self.x.u, self.x.w, self.f, c.alpha1, c.alpha0, c.a)


def solve(cfg: RunConfig, f: np.ndarray, clean: np.ndarray | None = None) -> RunOutcome:
    """Dispatch to the configured solver. ALM inner failures are reported, not raised."""
    t0 = time.perf_counter()
    if cfg.solver == "alg2":
        res = alg2_run(f, cfg.alpha1, cfg.alpha0, cfg.a, tol=cfg.tol, max_iters=cfg.max_iters,
                       check_every=cfg.check_every, time_budget=cfg.time_budget)
        return RunOutcome(cfg, res.x, res.status, res.iterations, time.perf_counter() - t0,
                          res.trace, f, clean)
    alm_cfg = ALMConfig(
        sigma0=cfg.sigma0, growth=cfg.sigma_growth, sigma_max=max(cfg.sigma_max, cfg.sigma0),
        delta=cfg.delta, outer_tol=cfg.tol, max_outer=cfg.max_outer,
        variant=cfg.solver.split("-")[1], time_budget=cfg.time_budget,
        inner=InnerConfig(enable_line_search=cfg.line_search),
    )
    try:
        res = alm_run(f, cfg.alpha1, cfg.alpha0, cfg.a, alm_cfg)
    except ALMFailure as exc:
        part = exc.result
        return RunOutcome(cfg, part.x, "failed", part.state.k, time.perf_counter() - t0,
                          part.trace, f, clean, error=str(exc))
    return RunOutcome(cfg, res.x, res.status, res.state.k, time.perf_counter() - t0, res.trace, f, clean)


def trace_csv(trace, timing: bool = True) -> str:
    """CSV text of a trace; floats use ``repr`` so they parse back exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace:
        row = []
        for col in TRACE_COLUMNS:
            val = getattr(rec, col)
            if col == "wall_ms" and not timing:
                val = 0.0
            row.append(repr(float(val)) if isinstance(val, float) else str(val))
        writer.writerow(row)
    return buf.getvalue()


def read_trace_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: (int(v) if k in ("k", "n_ssn") else float(v)) for k, v in row.items()} for row in rows]


def write_outputs(outcome: RunOutcome) -> None:
    cfg = outcome.config
    if cfg.trace:
        Path(cfg.trace).write_text(trace_csv(outcome.trace, cfg.timing))
    if cfg.output and outcome.status != "failed":
        imageio.save_image(cfg.output, outcome.x.u)


def summary_line(outcome: RunOutcome) -> str:
    parts = [f"solver={outcome.config.solver}", f"status={outcome.status}",
             f"iterations={outcome.iterations}", f"time={outcome.seconds:.2f}s"]
    if outcome.final is not None:
        parts += [f"U={outcome.final.U:.3e}", f"gap={outcome.final.gap:.3e}"]
    q = outcome.quality()
    if q:
        parts += [f"PSNR={q['psnr']:.2f}", f"RMSE={q['rmse']:.3e}", f"SSIM={q['ssim']:.4f}"]
    return " ".join(parts)


# -- comparison ---------------------------------------------------------------

COMPARE_COLUMNS = ("solver", "n(t)", "res(u)", "res(w)", "res(lambda)", "res(mu)", "Gap", "PSNR", "U")


def _data_key(cfg: RunConfig):
    return (cfg.input, cfg.noise_percent, cfg.noise_std, cfg.seed if (cfg.noise_percent or cfg.noise_std) else None,
            cfg.clean_ref)


def compare(configs: list[RunConfig]) -> list[RunOutcome]:
    """Run several configurations on one input, sequentially."""
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configurations")
    keys = {_data_key(c) for c in configs}
    if len(keys) != 1:
        raise ConfigError("compared configurations must share input, noise and seed")
    f, clean = prepare_data(configs[0])
    return [solve(c, f, clean) for c in configs]


def comparison_rows(outcomes: list[RunOutcome]) -> list[list[str]]:
    rows = []
    for o in outcomes:
        target = f"{o.config.tol:.0e}"
        rec = o.final
        if o.status in ("timeout", "failed") or rec is None:
            rows.append([o.config.name] + ["---"] * 7 + [target])
            continue
        q = o.quality()
        rows.append([
            o.config.name,
            f"{o.iterations}({o.seconds:.2f}s)",
            f"{rec.res_u:.2e}", f"{rec.res_w:.2e}", f"{rec.res_lambda:.2e}", f"{rec.res_mu:.2e}",
            f"{rec.gap:.2e}",
            f"{q['psnr']:.2f}" if q else "n/a",
            target,
        ])
    return rows


def format_table(rows: list[list[str]]) -> str:
    table = [list(COMPARE_COLUMNS)] + rows
    widths = [max(len(r[i]) for r in table) for i in range(len(COMPARE_COLUMNS))]
    lines = ["  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(r, widths)))
             for r in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def comparison_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPARE_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()
