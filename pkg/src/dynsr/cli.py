"""Command-line interface: every subcommand writes CSV to ``--out`` or stdout.

Failures print one JSON line ``{"error": <code>, "message": <text>}`` to
stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .adversarial import (
    worst_case_number_1d,
    worst_case_number_tilted,
    worst_case_support,
    worst_case_support_tilted,
)
from .bounds import compute_bounds
from .errors import ConfigError, DynsrError
from .experiments import (
    PHASE_SIGMAS,
    ExperimentConfig,
    ResultTable,
    builtin_scenario,
    config_from_mapping,
    format_csv,
    phase_diagram,
    run_scenario,
)
from .io import fmt, format_measurement_set, load_config, read_measurement_set, read_parameter_set
from .model import MeasurementSet, TimeSeries, cartesian_grid, ray_grid, synthesize
from .music import PeakParams, TestWindow, music_order, music_spectrum, peak_indices, unambiguous_window
from .numdetect import build_hankel, detect_number_2d, detect_number_sweep
from .velocity import VelocityConfig, recover_velocities_1d, recover_velocities_2d, velocity_directions


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("usage", message)


def _fail(code: str, message: str):
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    raise SystemExit(2)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise DynsrError(f"cannot write {out}: {exc.strerror}") from exc


def _config(args) -> ExperimentConfig:
    """Config from ``--config`` and/or ``--scenario``; flags override file values."""
    data = load_config(args.config) if args.config else {}
    if getattr(args, "scenario", None):
        data = {**data, "scenario": args.scenario}
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = config_from_mapping(data)
    sources_path = getattr(args, "sources", None)
    if sources_path:
        src = read_parameter_set(sources_path)
        cfg = _replace(cfg, sources=src, tau=src.tau)
    updates = {}
    for flag, key in (("sigma", "sigma"), ("T", "T"), ("omega", "omega"), ("trials", "trials")):
        val = getattr(args, flag, None)
        if val is not None:
            updates[key] = (val,) if key == "sigma" else val
    return _replace(cfg, **updates) if updates else cfg


def _replace(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


def _measurement(args, cfg: ExperimentConfig, rays=None) -> MeasurementSet:
    """Read ``--input`` or synthesize from the configured sources.

    ``rays`` (angles) restricts synthesis to the direction nodes an algorithm reads.
    """
    if getattr(args, "input", None):
        return read_measurement_set(args.input)
    if cfg.sources is None:
        raise ConfigError("give --input, --sources, --scenario or a config with sources")
    src = cfg.sources
    if rays is not None and src.dim == 2:
        grid = ray_grid(cfg.omega, rays)
    elif src.dim == 1:
        grid = cartesian_grid(cfg.omega, 1, getattr(args, "spacing", None))
    else:
        grid = cartesian_grid(cfg.omega, src.dim, getattr(args, "spacing", None))
    noise = None if cfg.noiseless else cfg.sigma[0]
    return synthesize(src, grid, cfg.T, noise, cfg.seed)


def _series_1d(meas: MeasurementSet) -> TimeSeries:
    if meas.dim != 1:
        raise DynsrError("this subcommand needs 1-D measurements")
    idx = meas.grid.find_node(np.array([meas.omega_max]))
    return TimeSeries(meas.frames[:, idx], meas.omega_max)


def _sigma(args, cfg, meas: MeasurementSet | None = None) -> float:
    if getattr(args, "sigma", None) is not None:
        return float(args.sigma)
    if meas is not None and meas.sigma is not None:
        return float(meas.sigma)
    return float(cfg.sigma[0])


# --- subcommands -------------------------------------------------------------------------


def cmd_synth(args) -> str:
    cfg = _config(args)
    rays = None
    if args.grid == "rays":
        rays = velocity_directions(args.n_rays) if args.n_rays else velocity_directions(2)
    return format_measurement_set(_measurement(args, cfg, rays))


def cmd_detect_number(args) -> str:
    cfg = _config(args)
    spectra: list = []
    if args.input:
        meas = read_measurement_set(args.input)
    else:
        meas = None
    src = meas if meas is not None else cfg.sources
    if src is None:
        raise ConfigError("give --input, --sources, --scenario or a config with sources")
    sigma = _sigma(args, cfg, meas)
    if src.dim == 1:
        ser = _series_1d(meas if meas is not None else _measurement(args, cfg))
        n_hat = detect_number_sweep(ser, sigma)
        for s in range(1, (ser.T - 1) // 2 + 1):
            spectra.append((0.0, s, build_hankel(ser, s).singular_values()))
    else:
        N = args.N if args.N is not None else cfg.N
        n_max = args.n_max if args.n_max is not None else cfg.n_max
        if N is None and meas is not None and meas.grid.scheme == "rays":
            N = meas.grid.size  # one node per sweep direction
        if N is None:
            N = n_max * (n_max + 1) // 2
        if meas is None:
            angles = np.pi * np.arange(1, N + 1) / N
            meas = _measurement(args, cfg, angles)
        n_hat = detect_number_2d(meas, sigma, N, n_max=n_max, spectra=spectra)
    if args.spectra:
        table = ResultTable(("phi", "s", "index", "singular_value", "threshold", "detected_n"))
        for phi, s, sv in spectra:
            for k, val in enumerate(sv, start=1):
                table.rows.append((phi, s, k, float(val), (s + 1) * sigma, n_hat))
    else:
        table = ResultTable(("detected_n", "sigma"), [(n_hat, sigma)])
    return format_csv(table)


def cmd_music_1d(args) -> str:
    cfg = _config(args)
    meas = _measurement(args, cfg)
    ser = _series_1d(meas)
    if args.n > music_order(ser.T):
        raise DynsrError(f"n={args.n} needs more frames (s={music_order(ser.T)})")
    default = unambiguous_window(ser.omega_scale, args.tps)
    window = TestWindow(
        args.ts if args.ts is not None else default.start,
        args.te if args.te is not None else default.stop,
        args.tps,
    )
    image = music_spectrum(ser, args.n, window)
    params = PeakParams(args.pcr, args.dcr, args.dct)
    step = float(image.test_points[1] - image.test_points[0])
    picks = peak_indices(image.values, params, step)
    keep = set(sorted(picks, key=lambda j: -image.values[j])[: args.n])
    table = ResultTable(("test_point", "value", "is_peak"))
    for j, (x, v) in enumerate(zip(image.test_points, image.values)):
        table.rows.append((float(x), float(v), j in keep))
    return format_csv(table)


def cmd_recover_velocity(args) -> str:
    cfg = _config(args)
    if args.input:
        meas = read_measurement_set(args.input)
        dim = meas.dim
    else:
        meas = None
        if cfg.sources is None:
            raise ConfigError("give --input, --sources, --scenario or a config with sources")
        dim = cfg.sources.dim
    sigma = _sigma(args, cfg, meas)
    n = args.n if args.n is not None else cfg.n
    tps = args.tps if args.tps is not None else cfg.tps
    if dim == 1:
        meas = meas if meas is not None else _measurement(args, cfg)
        ser = _series_1d(meas)
        est = recover_velocities_1d(ser, sigma, n, unambiguous_window(ser.omega_scale, tps), cfg.peaks)
        table = ResultTable(("index", "step_1"), [(i, float(v)) for i, v in enumerate(est)])
        return format_csv(table)
    vcfg = VelocityConfig(
        N=args.N if args.N is not None else cfg.N,
        correlation_cap=args.c if args.c is not None else cfg.correlation_cap,
        tps=tps,
        peaks=cfg.peaks,
        n_max=cfg.n_max,
    )
    if meas is None:
        # sample every direction the pipeline may read
        n_for_rays = n if n is not None else cfg.n_max
        angles = set(velocity_directions(n_for_rays, vcfg.N).tolist())
        if n is None:
            N = vcfg.n_max * (vcfg.n_max + 1) // 2
            angles |= set((np.pi * np.arange(1, N + 1) / N).tolist())
        meas = _measurement(args, cfg, sorted(angles))
    res = recover_velocities_2d(meas, sigma, n, vcfg)
    table = ResultTable(("index", "step_1", "step_2", "residual", "phi_1", "phi_2", "permutation"))
    perm = " ".join(str(p) for p in res.permutation)
    for i, v in enumerate(res.velocities):
        table.rows.append((i, float(v[0]), float(v[1]), res.residual, res.chosen_phis[0], res.chosen_phis[1], perm))
    if args.diagnostics:
        diag = ResultTable(("phi", "detected_n", "count", "min_gap", "projected_values"))
        for r in res.directions:
            vals = " ".join(fmt(float(x)) for x in r.projected_values)
            diag.rows.append((r.phi, r.detected, r.count, r.min_gap, vals))
        _emit(format_csv(diag), args.diagnostics)
    return format_csv(table)


def cmd_bounds(args) -> str:
    rep = compute_bounds(args.d, args.n, args.T, args.omega, args.sigma, args.m_min, args.s)
    rows = rep.as_rows()
    if args.format == "text":
        width = max(len(r[0]) for r in rows)
        lines = [f"d={rep.d} n={rep.n} T={rep.T} omega={fmt(rep.omega)} sigma={fmt(rep.sigma)} "
                 f"m_min={fmt(rep.m_min)} s={rep.s}"]
        for name, val, ok in rows:
            lines.append(f"{name:<{width}}  {val:.6e}{'' if ok else '  (T floor not met)'}")
        text = "\n".join(lines) + "\n"
        if args.out:
            _emit(format_csv(_bounds_table(rep, rows)), args.out)
            return ""
        return text
    return format_csv(_bounds_table(rep, rows))


def _bounds_table(rep, rows) -> ResultTable:
    t = ResultTable(("quantity", "value", "applicable", "d", "n", "T", "omega", "sigma", "m_min", "s"))
    for name, val, ok in rows:
        t.rows.append((name, val, ok, rep.d, rep.n, rep.T, rep.omega, rep.sigma, rep.m_min, rep.s))
    return t


def cmd_worst_case(args) -> str:
    if args.kind == "number":
        pair = worst_case_number_1d(args.n, args.omega, args.sigma, args.m_min, T=args.T)
    elif args.kind == "support":
        pair = worst_case_support(args.n, args.omega, args.sigma, args.m_min, T=args.T)
    elif args.kind == "number-tilted":
        pair = worst_case_number_tilted(args.n, args.d, args.T, args.omega, args.sigma, args.m_min)
    else:
        pair = worst_case_support_tilted(args.n, args.d, args.T, args.omega, args.sigma, args.m_min)
    d = pair.rich.dim
    cols = ("set", "amplitude_re", "amplitude_im") + tuple(f"y_{i + 1}" for i in range(d)) + tuple(
        f"v_{i + 1}" for i in range(d)
    ) + ("tau", "delta", "separation", "verified_residual", "margin", "sigma")
    table = ResultTable(cols)
    for name, ps in (("rich", pair.rich), ("poor", pair.poor)):
        for a, y, v in zip(ps.amplitudes, ps.locations, ps.velocities):
            table.rows.append((name, float(a.real), float(a.imag), *map(float, y), *map(float, v), ps.tau,
                               pair.delta, pair.separation, pair.verified_residual, pair.margin, pair.sigma))
    return format_csv(table)


def cmd_run(args) -> str:
    cfg = _config(args)
    if args.timing:
        cfg = _replace(cfg, timing=True)
    return format_csv(run_scenario(cfg))


def cmd_phase_diagram(args) -> str:
    data = load_config(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    if not data.get("scenario"):
        data.setdefault("task", "detect-number-1d")
    cfg = config_from_mapping(data)
    updates = {}
    if args.kind:
        updates["phase_kind"] = args.kind
    if args.sigmas:
        updates["sigma"] = tuple(args.sigmas)
    elif "sigma" not in data:
        updates["sigma"] = PHASE_SIGMAS
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.T is not None:
        updates["T"] = args.T
    if updates:
        cfg = _replace(cfg, **updates)
    diagram = phase_diagram(cfg)
    if args.summary:
        _emit(format_csv(diagram.summary_table()), args.summary)
    slope = diagram.slope()
    sys.stderr.write(f"{diagram.kind}: fitted slope {slope:.4f}\n" if math.isfinite(slope) else "slope undefined\n")
    return format_csv(diagram.to_table())


# --- parser ---------------------------------------------------------------------------------


def _source_flags(p):
    p.add_argument("--scenario", help="builtin scenario: sec4_3, sec5_3_2d, sec5_3_1d")
    p.add_argument("--sources", help="parameter-set CSV to synthesize from")
    p.add_argument("--input", help="measurement CSV to read instead of synthesizing")
    p.add_argument("--T", type=int, help="last frame index")
    p.add_argument("--omega", type=float, help="cut-off frequency")
    p.add_argument("--spacing", type=float, help="cartesian grid spacing")


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool):
        # subcommand copies must not reset values given before the subcommand
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        p = argparse.ArgumentParser(add_help=False)
        p.add_argument("--seed", type=int, help="master random seed", **kw)
        p.add_argument("--out", help="output CSV path (default stdout)", **kw)
        p.add_argument("--config", help="TOML experiment definition", **kw)
        return p

    common = global_flags(suppress=True)
    parser = _Parser(prog="dynsr", description=__doc__.splitlines()[0], parents=[global_flags(False)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="synthesize measurements")
    _source_flags(p)
    p.add_argument("--sigma", type=float, help="noise radius")
    p.add_argument("--grid", choices=("cartesian", "rays"), default="cartesian")
    p.add_argument("--n-rays", type=int, dest="n_rays", help="source count used to pick ray directions")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect-number", parents=[common], help="thresholding source-number detection")
    _source_flags(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--N", type=int, help="number of sweep directions (2-D)")
    p.add_argument("--n-max", type=int, dest="n_max", help="sets N = n_max (n_max + 1) / 2 by default")
    p.add_argument("--spectra", action="store_true", help="emit per-direction singular spectra")
    p.set_defaults(func=cmd_detect_number)

    p = sub.add_parser("music-1d", parents=[common], help="MUSIC imaging functional on 1-D data")
    _source_flags(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ts", type=float)
    p.add_argument("--te", type=float)
    p.add_argument("--tps", type=float, default=1e-3)
    p.add_argument("--pcr", type=int, default=3)
    p.add_argument("--dcr", type=int, default=3)
    p.add_argument("--dct", type=float, default=0.0)
    p.set_defaults(func=cmd_music_1d)

    p = sub.add_parser("recover-velocity", parents=[common], help="projection-based velocity recovery")
    _source_flags(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--c", type=float, help="correlation cap for the second direction")
    p.add_argument("--tps", type=float)
    p.add_argument("--diagnostics", help="path for the per-direction diagnostics CSV")
    p.set_defaults(func=cmd_recover_velocity)

    p = sub.add_parser("bounds", parents=[common], help="evaluate resolution limits")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1e-4)
    p.add_argument("--m-min", type=float, dest="m_min", default=1.0)
    p.add_argument("--s", type=int)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("worst-case", parents=[common], help="construct an indistinguishable pair")
    p.add_argument("--kind", choices=("number", "support", "number-tilted", "support-tilted"), default="number")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--T", type=int, default=4)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1e-2)
    p.add_argument("--m-min", type=float, dest="m_min", default=1.0)
    p.set_defaults(func=cmd_worst_case)

    p = sub.add_parser("run", parents=[common], help="run a Monte Carlo scenario")
    p.add_argument("--scenario")
    p.add_argument("--sources")
    p.add_argument("--sigma", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--timing", action="store_true", help="add a wall-clock runtime column")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("phase-diagram", parents=[common], help="success rates over sigma x separation")
    p.add_argument("--kind", choices=("number-1d", "support-1d"))
    p.add_argument("--sigmas", type=float, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--summary", help="path for critical separations and the fitted slope")
    p.set_defaults(func=cmd_phase_diagram)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
        if text:
            _emit(text, args.out)
    except DynsrError as exc:
        _fail(exc.code, str(exc))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
