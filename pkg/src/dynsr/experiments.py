"""Seeded Monte Carlo experiments, phase diagrams and CSV tables."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, DynsrError
from .io import _open_for_read, _open_for_write, fmt, parse_cell
from .model import ParameterSet, sample_along_direction
from .music import PeakParams, TestWindow, unambiguous_window
from .numdetect import detect_number_2d, detect_number_sweep
from .velocity import VelocityConfig, match_errors, recover_velocities_1d, recover_velocities_2d

TASKS = ("detect-number-1d", "detect-number-2d", "recover-velocity-1d", "recover-velocity-2d")
PHASE_KINDS = ("number-1d", "support-1d")
PHASE_SIGMAS = (1e-2, 1e-3, 1e-4, 1e-5)

# Source modulus for the builtin scenarios, which only fix intensities up to "O(1)".
BUILTIN_AMPLITUDE = 4.0


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def trial_seed(master: int, *indices: int) -> int:
    """Per-trial seed hashed from the master seed and the cell/trial indices."""
    return int(np.random.SeedSequence([int(master), *map(int, indices)]).generate_state(1)[0])


@dataclass(frozen=True)
class SourceGenerator:
    """Random sources: velocities in a ball with a minimum pairwise distance.

    Amplitudes have modulus ``amplitude`` and uniformly random phase.
    """

    n: int = 2
    dim: int = 2
    velocity_radius: float = 0.7
    location_radius: float = 0.3
    min_separation: float = 0.1
    amplitude: float = 1.0
    max_tries: int = 10_000

    def draw(self, rng: np.random.Generator, tau: float) -> ParameterSet:
        def ball(radius):
            while True:
                p = rng.uniform(-radius, radius, self.dim)
                if np.linalg.norm(p) <= radius:
                    return p

        for _ in range(self.max_tries):
            vel = np.array([ball(self.velocity_radius) for _ in range(self.n)])
            gaps = [np.linalg.norm(vel[i] - vel[j]) for i in range(self.n) for j in range(i)]
            if not gaps or min(gaps) >= self.min_separation:
                loc = np.array([ball(self.location_radius) for _ in range(self.n)])
                amps = self.amplitude * np.exp(2j * np.pi * rng.random(self.n))
                return ParameterSet(amps, loc, vel, tau=tau)
        raise ConfigError("generator could not meet the minimum separation; loosen it")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "custom"
    task: str = "recover-velocity-2d"
    sources: ParameterSet | None = None
    generator: SourceGenerator | None = None
    omega: float = 1.0
    tau: float = 1.0
    T: int = 4
    sigma: tuple[float, ...] = (1e-2,)
    trials: int = 100
    seed: int = 0
    n: int | None = None
    N: int | None = None
    n_max: int = 6
    correlation_cap: float = math.cos(math.pi / 6)
    tps: float = 1e-3
    pcr: int = 3
    dcr: int = 3
    dct: float = 0.0
    tolerance: float | None = None
    noiseless: bool = False
    timing: bool = False
    # phase diagrams
    phase_kind: str = "number-1d"
    separations: tuple[float, ...] = ()
    success_level: float = 0.9

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}; got {self.task!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.sigma:
            raise ConfigError("sigma must list at least one noise level")
        if any(not s > 0 for s in self.sigma):
            raise ConfigError("every sigma must be positive")
        if self.T < 1:
            raise ConfigError("T must be at least 1")
        if not self.omega > 0 or not self.tau > 0:
            raise ConfigError("omega and tau must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.phase_kind not in PHASE_KINDS:
            raise ConfigError(f"phase kind must be one of {', '.join(PHASE_KINDS)}")
        if any(not s > 0 for s in self.separations):
            raise ConfigError("separations must be positive")
        if not 0 < self.success_level <= 1:
            raise ConfigError("success_level must lie in (0, 1]")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")

    @property
    def peaks(self) -> PeakParams:
        return PeakParams(self.pcr, self.dcr, self.dct)

    def velocity_config(self) -> VelocityConfig:
        return VelocityConfig(
            N=self.N, correlation_cap=self.correlation_cap, tps=self.tps, peaks=self.peaks, n_max=self.n_max
        )

    def window(self) -> TestWindow:
        return unambiguous_window(self.omega, self.tps)


_SIMPLE_KEYS = {f.name for f in fields(ExperimentConfig)} - {"sources", "generator", "sigma", "separations"}


def _as_tuple(value, name) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, Mapping):
        try:
            start, stop = float(value["start"]), float(value["stop"])
            per = int(value.get("per_decade", 20))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: log sweep needs start, stop and optional per_decade") from exc
        if not 0 < start < stop or per < 1:
            raise ConfigError(f"{name}: need 0 < start < stop and per_decade >= 1")
        count = int(round(per * math.log10(stop / start))) + 1
        return tuple(float(x) for x in np.logspace(math.log10(start), math.log10(stop), count))
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, a list of numbers or a log sweep table") from exc


def _parse_sources(entries, tau: float) -> ParameterSet:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("sources must be a nonempty list of tables")
    triples = []
    for i, e in enumerate(entries):
        try:
            amp = e.get("amplitude", 1.0)
            amp = complex(amp[0], amp[1]) if isinstance(amp, list) else complex(amp)
            triples.append((amp, e["location"], e["velocity"]))
        except (KeyError, TypeError, AttributeError, IndexError) as exc:
            raise ConfigError(f"sources[{i}] needs location, velocity and optional amplitude") from exc
    try:
        return ParameterSet.from_entries(triples, tau=tau)
    except DynsrError as exc:
        raise ConfigError(f"sources: {exc}") from exc


def config_from_mapping(data: Mapping[str, Any]) -> ExperimentConfig:
    """Build a config from a TOML-style mapping; builtin scenarios supply defaults.

    Nested ``algorithm`` and ``phase`` tables are flattened into the top level.
    """
    flat: dict[str, Any] = {}
    for key, value in data.items():
        if key in ("algorithm", "phase") and isinstance(value, Mapping):
            for k, v in value.items():
                flat["phase_kind" if (key == "phase" and k == "kind") else k] = v
        else:
            flat[key] = value
    scenario = flat.get("scenario", "custom")
    base = builtin_scenario(scenario) if scenario != "custom" else ExperimentConfig()
    unknown = set(flat) - _SIMPLE_KEYS - {"sources", "generator", "sigma", "separations", "amplitude", "out"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    updates: dict[str, Any] = {}
    for key in _SIMPLE_KEYS & set(flat):
        updates[key] = flat[key]
    for key in ("sigma", "separations"):
        if key in flat:
            updates[key] = _as_tuple(flat[key], key)
    tau = float(updates.get("tau", base.tau))
    if "sources" in flat:
        updates["sources"] = _parse_sources(flat["sources"], tau)
    elif base.sources is not None and tau != base.sources.tau:
        src = base.sources
        updates["sources"] = ParameterSet(src.amplitudes, src.locations, src.velocities, tau=tau)
    if "amplitude" in flat:
        src = updates.get("sources", base.sources)
        if src is None:
            raise ConfigError("amplitude needs explicit or builtin sources")
        amp = float(flat["amplitude"])
        updates["sources"] = ParameterSet(np.full(src.n, amp), src.locations, src.velocities, tau=src.tau)
    if "generator" in flat:
        try:
            updates["generator"] = SourceGenerator(**flat["generator"])
        except TypeError as exc:
            raise ConfigError(f"generator: {exc}") from exc
    try:
        return replace(base, **updates)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def builtin_scenario(name: str, amplitude: float = BUILTIN_AMPLITUDE) -> ExperimentConfig:
    """The three reference configurations, with equal source amplitudes."""
    a = np.full(2, amplitude)
    if name == "sec4_3":
        src = ParameterSet(a, [[0.0, 0.27], [0.20, 0.17]], [[0.14, 0.51], [0.45, 0.17]], tau=0.2)
        return ExperimentConfig(name, "detect-number-2d", src, omega=1.0, tau=0.2, T=4, sigma=(1e-2,), N=6)
    if name == "sec5_3_2d":
        src = ParameterSet(a, [[0.22, 0.08], [0.05, 0.08]], [[0.47, 0.11], [0.58, 0.56]], tau=1.0)
        return ExperimentConfig(name, "recover-velocity-2d", src, omega=1.0, tau=1.0, T=4, sigma=(1e-2,), n=2,
                                tolerance=0.06)
    if name == "sec5_3_1d":
        src = ParameterSet(a, [0.296, 0.038], [0.2, 1.1], tau=1.0)
        return ExperimentConfig(name, "recover-velocity-1d", src, omega=1.0, tau=1.0, T=4, sigma=(0.3,), n=2,
                                tolerance=0.1)
    raise ConfigError(f"unknown scenario {name!r}; builtins are sec4_3, sec5_3_2d, sec5_3_1d")


def velocity_separation(ps: ParameterSet) -> float:
    """Minimum distance between per-frame displacements ``tau v_j``."""
    if ps.n < 2:
        return math.inf
    w = ps.steps
    return float(min(np.linalg.norm(w[i] - w[j]) for i in range(ps.n) for j in range(i)))


RUN_COLUMNS = (
    "scenario", "task", "trial", "seed", "sigma", "separation", "true_n", "detected_n", "max_error", "success", "status",
)


def _run_trial(cfg: ExperimentConfig, sources: ParameterSet, sigma: float, seed: int):
    """Returns ``(detected_n, max_error, success, status)`` for one trial."""
    noise = None if cfg.noiseless else sigma
    sample = dict(omega_max=cfg.omega, T=cfg.T, noise=noise, seed=seed)
    if cfg.task == "detect-number-2d":
        n_hat = detect_number_2d(sources, sigma, cfg.N, n_max=cfg.n_max, **sample)
        return n_hat, math.nan, n_hat == sources.n, "ok"
    if cfg.task == "detect-number-1d":
        ser = sample_along_direction(sources, [1.0], cfg.omega, cfg.T, noise, seed)
        n_hat = detect_number_sweep(ser, sigma)
        return n_hat, math.nan, n_hat == sources.n, "ok"
    d_min = velocity_separation(sources)
    tol = cfg.tolerance if cfg.tolerance is not None else d_min / 2
    truth = sources.velocities
    try:
        if cfg.task == "recover-velocity-2d":
            res = recover_velocities_2d(sources, sigma, cfg.n, cfg.velocity_config(), **sample)
            est = res.velocities / sources.tau
        else:
            est = recover_velocities_1d(sources, sigma, cfg.n, cfg.window(), cfg.peaks, **sample) / sources.tau
    except DynsrError as exc:
        return 0, math.inf, False, exc.code
    err = float(np.max(match_errors(est, truth)))
    return len(est), err, err < tol, "ok"


def run_scenario(config: ExperimentConfig) -> ResultTable:
    """One row per (sigma, trial), sorted by sigma then trial."""
    if config.sources is None and config.generator is None:
        raise ConfigError(f"scenario {config.scenario!r} defines neither sources nor a generator")
    columns = RUN_COLUMNS + (("runtime",) if config.timing else ())
    table = ResultTable(columns)
    for si, sigma in sorted(enumerate(config.sigma), key=lambda p: p[1]):
        for trial in range(config.trials):
            seed = trial_seed(config.seed, si, trial)
            if config.generator is not None:
                sources = config.generator.draw(np.random.default_rng(seed), config.tau)
            else:
                sources = config.sources
            start = time.perf_counter()
            n_hat, err, ok, status = _run_trial(config, sources, sigma, seed)
            row = (config.scenario, config.task, trial, seed, sigma, velocity_separation(sources),
                   sources.n, int(n_hat), err, bool(ok), status)
            if config.timing:
                row += (time.perf_counter() - start,)
            table.rows.append(row)
    return table


def success_count(table: ResultTable) -> int:
    return sum(1 for s in table.column("success") if s)


# --- phase diagrams ------------------------------------------------------------------


@dataclass
class PhaseDiagram:
    """Success counts over a (sigma x separation) grid for two 1-D sources."""

    kind: str
    sigmas: tuple[float, ...]
    separations: tuple[float, ...]
    successes: np.ndarray  # (len(sigmas), len(separations))
    trials: int
    predicate: str
    success_level: float = 0.9

    @property
    def rates(self) -> np.ndarray:
        return self.successes / self.trials

    def critical_separations(self) -> np.ndarray:
        """Smallest swept separation reaching the success level, per sigma (nan if none)."""
        out = np.full(len(self.sigmas), np.nan)
        for i, row in enumerate(self.rates):
            hit = np.flatnonzero(row >= self.success_level)
            if hit.size:
                out[i] = self.separations[hit[0]]
        return out

    def slope(self) -> float:
        """OLS slope of log(critical separation) against log(sigma)."""
        crit = self.critical_separations()
        ok = np.isfinite(crit)
        if ok.sum() < 2:
            return math.nan
        x = np.log(np.asarray(self.sigmas)[ok])
        return float(np.polyfit(x, np.log(crit[ok]), 1)[0])

    def to_table(self) -> ResultTable:
        t = ResultTable(("kind", "sigma", "separation", "trials", "successes", "rate"))
        for i in np.argsort(self.sigmas, kind="stable"):
            for j in np.argsort(self.separations, kind="stable"):
                k = int(self.successes[i, j])
                t.rows.append((self.kind, self.sigmas[i], self.separations[j], self.trials, k, k / self.trials))
        return t

    def summary_table(self) -> ResultTable:
        t = ResultTable(("kind", "sigma", "critical_separation", "slope"))
        slope = self.slope()
        for s, c in sorted(zip(self.sigmas, self.critical_separations())):
            t.rows.append((self.kind, s, float(c), slope))
        return t


def default_separations() -> tuple[float, ...]:
    """Twenty log-spaced values per decade from 1e-3 to 0.5."""
    return _as_tuple({"start": 1e-3, "stop": 0.5, "per_decade": 20}, "separations")


def _phase_trial(kind: str, sep: float, sigma: float, T: int, omega: float, seed: int) -> bool:
    rng = np.random.default_rng(seed)
    amps = np.exp(2j * np.pi * rng.random(2))
    truth = np.array([-sep / 2, sep / 2])
    ps = ParameterSet(amps, np.zeros((2, 1)), truth[:, None], tau=1.0)
    ser = sample_along_direction(ps, [1.0], omega, T, sigma, seed)
    if kind == "number-1d":
        return detect_number_sweep(ser, sigma) == 2
    # local window around the pair keeps the test-point budget proportional to sep
    window = TestWindow(-1.5 * sep, 1.5 * sep, sep / 100)
    est = recover_velocities_1d(ser, sigma, 2, window)
    return len(est) == 2 and float(np.max(np.abs(est - truth))) < sep / 2


def phase_diagram(config: ExperimentConfig) -> PhaseDiagram:
    """Success rates of two-source 1-D velocity problems over sigma x separation.

    ``number-1d`` succeeds when the sweep detector returns 2; ``support-1d``
    when MUSIC places both velocities within half the separation.
    """
    seps = config.separations or default_separations()
    succ = np.zeros((len(config.sigma), len(seps)), dtype=int)
    for i, sigma in enumerate(config.sigma):
        for j, sep in enumerate(seps):
            succ[i, j] = sum(
                _phase_trial(config.phase_kind, sep, sigma, config.T, config.omega, trial_seed(config.seed, i, j, t))
                for t in range(config.trials)
            )
    predicate = "detected n == 2" if config.phase_kind == "number-1d" else "max error < separation / 2"
    return PhaseDiagram(config.phase_kind, tuple(config.sigma), tuple(seps), succ, config.trials, predicate,
                        config.success_level)


# --- CSV ---------------------------------------------------------------------------------


def emit_csv(table: ResultTable | PhaseDiagram, path) -> None:
    """UTF-8 CSV with a header row; phase diagrams are written cell by cell."""
    if isinstance(table, PhaseDiagram):
        table = table.to_table()
    text = format_csv(table)
    with _open_for_write(path) as fh:
        fh.write(text)


def format_csv(table: ResultTable) -> str:
    """The exact text :func:`emit_csv` would write."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> ResultTable:
    with _open_for_read(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DynsrError(f"{path}: empty file")
    return ResultTable(tuple(rows[0]), [tuple(parse_cell(c) for c in r) for r in rows[1:]])
