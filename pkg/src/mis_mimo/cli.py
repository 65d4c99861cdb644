"""Command-line front end: ``validate``, ``trial`` and ``sweep``.

The config file is a flat JSON object. Any :class:`SimConfig` field may
appear; omitted fields take their defaults. The sweep keys are ``axis``,
``values``, ``trials``, ``schemes`` and ``constraint``.

Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .harness import Scheme, SweepAxis, SweepSpec, axis_config, run_sweep, run_trial
from .model import ConfigError, SimConfig
from .projectors import ConstraintMode

log = logging.getLogger(__name__)

SWEEP_KEYS = ("axis", "values", "trials", "schemes", "constraint")
SUMMARY_FIELDS = ("axis_value", "scheme", "mean_sum_rate", "stderr", "trials", "failures")
TRIAL_FIELDS = ("axis_value", "scheme", "seed", "trial", "B", "R", "sum_rate", "iterations",
                "converged", "mmse", "error")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _coerce_sim(raw: dict) -> SimConfig:
    kw = {}
    for f in dataclasses.fields(SimConfig):
        if f.name not in raw:
            continue
        v = raw[f.name]
        if f.name == "d_prime_range":
            if not isinstance(v, (list, tuple)) or len(v) != 2:
                raise ConfigError("d_prime_range: must be a two-element list")
        elif isinstance(f.default, float):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{f.name}: must be a number, got {v!r}")
            v = float(v)
        kw[f.name] = v
    return SimConfig(**kw)


def parse_config(path) -> tuple[SimConfig, SweepSpec | None, ConstraintMode]:
    """Read and validate a config file.

    Returns the simulation config, the sweep description (``None`` when the
    file has no ``axis`` key) and the constraint mode.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config: no such file {str(path)!r}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = sorted(set(raw) - set(SimConfig.field_names()) - set(SWEEP_KEYS))
    if unknown:
        raise ConfigError(f"config: unknown keys {unknown}")

    cfg = _coerce_sim(raw)
    try:
        mode = ConstraintMode(raw.get("constraint", ConstraintMode.UNIMODULAR.value))
    except ValueError as exc:
        raise ConfigError(f"constraint: {exc}") from exc

    if "axis" not in raw:
        extra = sorted(k for k in ("values", "trials", "schemes") if k in raw)
        if extra:
            raise ConfigError(f"axis: required when {extra} are given")
        return cfg, None, mode
    try:
        axis = SweepAxis(raw["axis"])
    except ValueError:
        raise ConfigError(f"axis: must be one of {[a.value for a in SweepAxis]}") from None
    values = raw.get("values")
    if not isinstance(values, list) or not values:
        raise ConfigError("values: must be a non-empty list")
    if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values):
        raise ConfigError("values: entries must be numbers")
    trials = raw.get("trials", 100)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials: must be an integer >= 1")
    schemes = raw.get("schemes", [Scheme.MIS_ALL.value, Scheme.SCHEME1.value])
    if isinstance(schemes, str):
        schemes = [schemes]
    try:
        schemes = tuple(Scheme(s) for s in schemes)
    except ValueError:
        raise ConfigError(f"schemes: entries must be in {[s.value for s in Scheme]}") from None
    spec = SweepSpec(axis=axis, values=tuple(values), trials=trials, base=cfg, schemes=schemes, mode=mode)
    # every swept point must itself be a valid configuration
    for v in spec.values:
        try:
            axis_config(cfg, axis, v)
        except (ConfigError, TypeError) as exc:
            raise ConfigError(f"values: {v!r} is invalid for axis {axis.value} ({exc})") from exc
    return cfg, spec, mode


def config_snapshot(cfg: SimConfig, spec: SweepSpec | None, mode: ConstraintMode) -> dict:
    """Flat dict that :func:`parse_config` reads back to the same run."""
    snap = dataclasses.asdict(cfg)
    snap["d_prime_range"] = list(cfg.d_prime_range)
    snap["constraint"] = mode.value
    if spec is not None:
        snap.update(axis=spec.axis.value, values=list(spec.values), trials=spec.trials,
                    schemes=[s.value for s in spec.schemes])
    return snap


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(repr(float(x)) for x in v)
    return "" if v is None else str(v)


def write_summary(path: Path, summary: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for row in summary:
            w.writerow([_fmt(row[k]) for k in SUMMARY_FIELDS])


def write_trials(path: Path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_FIELDS)
        for r in rows:
            d = r.to_dict()
            w.writerow([_fmt(d[k]) for k in TRIAL_FIELDS])


def _cmd_validate(args) -> int:
    cfg, spec, mode = parse_config(args.config)
    msg = f"ok: N={cfg.N} K={cfg.K} M={cfg.M} B={cfg.B} constraint={mode.value}"
    if spec is not None:
        msg += f" axis={spec.axis.value} points={len(spec.values)} trials={spec.trials}"
    print(msg)
    return EXIT_OK


def _cmd_trial(args) -> int:
    cfg, spec, mode = parse_config(args.config)
    if args.constraint:
        mode = ConstraintMode(args.constraint)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    scheme = Scheme(args.scheme) if args.scheme else (spec.schemes[0] if spec else Scheme.HYBRID)
    res = run_trial(cfg, mode, scheme, cfg.seed)
    print(json.dumps(res.to_dict(), sort_keys=True))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg, spec, mode = parse_config(args.config)
    if spec is None:
        raise ConfigError("axis: a sweep config needs axis and values")
    if args.constraint:
        mode = ConstraintMode(args.constraint)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    spec = dataclasses.replace(spec, base=cfg, mode=mode)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"summary": out / "summary.csv", "trials": out / "trials.csv"}
    manifest_path = out / "manifest.json"
    try:
        result = run_sweep(spec, threads=args.threads)
        write_summary(paths["summary"], result.summary)
        write_trials(paths["trials"], result.trials)
        failures = sum(1 for r in result.trials if r.error is not None)
        manifest = {
            "version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "config": config_snapshot(cfg, spec, mode),
            "outputs": {k: p.name for k, p in paths.items()},
            "summary": result.summary,
            "failed_trials": failures,
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except BaseException:
        for p in (*paths.values(), manifest_path):
            if p.exists():
                p.unlink()
        raise
    if failures:
        print(f"warning: {failures} trial(s) failed, see trials.csv", file=sys.stderr)
    print(f"wrote {len(result.trials)} trials to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mis-sim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="flat JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--constraint", choices=[m.value for m in ConstraintMode], default=None)

    sp = sub.add_parser("validate", help="check a config file and exit")
    sp.add_argument("config")
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("trial", help="run one trial and print it as JSON")
    common(sp)
    sp.add_argument("--scheme", choices=[s.value for s in Scheme], default=None)
    sp.set_defaults(func=_cmd_trial)

    sp = sub.add_parser("sweep", help="run a parameter sweep and write CSV/JSON")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--threads", type=int, default=1, help="worker processes (speed only)")
    sp.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
