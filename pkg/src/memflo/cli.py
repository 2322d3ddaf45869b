"""Command-line harness: case-study runs, parameter sweeps, boundary bisection.

A run is described by a flat ``key = value`` config file (JSON accepted as an
alternative encoding).  Values are numbers, strings, ``inf``, or linear
ranges written ``range(start, stop, count)``.  Results are emitted as CSV
with a fixed header or as JSON with a stable field order; numbers are
serialized with 17 significant digits so parsing them back is bit exact.
Wall times and timestamps live in a separate metadata block so identical
configs produce identical row bytes.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, MatchedLine, MemfloError, NoConvergence, NoCycle
from .models import (
    CYCLE_AMPLITUDE_TOL,
    BrownianParticleModel,
    Memory1DModel,
    TlResonatorModel,
    cycle_amplitude,
    model1d_asymptotic_exponent,
    model1d_exponent,
    particle_spectrum,
    tl_spectrum,
)

__all__ = ["SweepConfig", "SweepResult", "RowResult", "parse_config", "run", "emit", "main"]

CSV_HEADER = "param1,param2,max_re_lambda,verdict,n_classes,cycle_residual,error_code"

_MODEL_PARAMS = {
    "memory1d": {"a", "k", "s"},
    "particle": {"alpha", "beta", "g", "k", "omega1", "ratio", "mass"},
    "tl": {"R", "Ra", "Z0", "tau_f", "n_roots"},
}
_MODES = {"spectrum", "sweep", "boundary_bisect", "convergence"}


@dataclass(frozen=True)
class LinearRange:
    start: float
    stop: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class SweepConfig:
    """Validated run description."""

    model: str
    mode: str
    parameters: dict
    n_harmonics: int = 30
    output_path: str | None = None
    output_format: str = "csv"
    bisect_tol: float = 1e-4

    def __post_init__(self):
        if self.model not in _MODEL_PARAMS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.mode not in _MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.n_harmonics < 1:
            raise ConfigError("n_harmonics must be at least 1")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.output_format!r}")
        unknown = set(self.parameters) - _MODEL_PARAMS[self.model]
        if unknown:
            raise ConfigError(f"parameters {sorted(unknown)} not valid for {self.model}")
        ranged = self.ranged_names()
        if self.mode == "sweep" and not 1 <= len(ranged) <= 2:
            raise ConfigError("sweep mode needs one or two ranged parameters")
        if self.mode == "boundary_bisect" and len(ranged) != 1:
            raise ConfigError("boundary_bisect mode needs exactly one ranged parameter")
        if self.mode == "spectrum" and ranged:
            raise ConfigError("spectrum mode takes fixed parameters only")
        if self.mode == "convergence":
            if self.model != "memory1d":
                raise ConfigError("convergence mode applies to the memory1d model")
            if "s" not in ranged:
                raise ConfigError("convergence mode needs a ranged s")
            if len(ranged) > 2:
                raise ConfigError("convergence mode allows at most one extra range")

    def ranged_names(self) -> list[str]:
        return [k for k, v in self.parameters.items() if isinstance(v, LinearRange)]

    def fixed_values(self) -> dict:
        return {k: v for k, v in self.parameters.items() if not isinstance(v, LinearRange)}


@dataclass
class RowResult:
    params: tuple
    max_re_lambda: float | None
    verdict: str | None
    n_classes: int | None
    cycle_residual: float | None
    walltime_ms: float
    error_code: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class SweepResult:
    rows: list
    metadata: dict

    @property
    def failed(self) -> bool:
        return any(r.error_code for r in self.rows)


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("range(") and text.endswith(")"):
        parts = [p.strip() for p in text[6:-1].split(",")]
        if len(parts) != 3:
            raise ConfigError(f"range needs (start, stop, count): {text!r}")
        try:
            return LinearRange(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise ConfigError(f"bad range {text!r}") from exc
    if text.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return int(text) if text.lstrip("+-").isdigit() else float(text)
    except ValueError:
        return text


def parse_config(path: str) -> SweepConfig:
    """Read a flat key = value config; JSON objects are accepted as well."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    stripped = raw.lstrip()
    entries: dict = {}
    if stripped.startswith("{"):
        data = json.loads(raw)
        for key, val in data.items():
            if isinstance(val, dict) and set(val) == {"range"}:
                start, stop, count = val["range"]
                entries[key] = LinearRange(float(start), float(stop), int(count))
            elif isinstance(val, str):
                entries[key] = _parse_value(val)
            else:
                entries[key] = val
    else:
        for lineno, line in enumerate(raw.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            entries[key.strip()] = _parse_value(value)
    return _config_from_entries(entries)


def _config_from_entries(entries: dict) -> SweepConfig:
    entries = dict(entries)
    try:
        model = str(entries.pop("model"))
        mode = str(entries.pop("mode"))
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc}") from exc
    n_harmonics = int(entries.pop("n_harmonics", 30))
    output_path = entries.pop("output", None)
    output_format = str(entries.pop("format", "csv"))
    bisect_tol = float(entries.pop("bisect_tol", 1e-4))
    return SweepConfig(model, mode, entries, n_harmonics=n_harmonics,
                       output_path=output_path, output_format=output_format,
                       bisect_tol=bisect_tol)


# --- per-point model evaluation ----------------------------------------------


def _seed_rng():
    seed = os.environ.get("MEMFLO_SEED")
    return np.random.default_rng(int(seed)) if seed else None


def _eval_memory1d(params: dict, n_harmonics: int, mode: str) -> RowResult:
    t0 = time.perf_counter()
    point = (params.get("_p1"), params.get("_p2"))
    try:
        model = Memory1DModel(float(params.get("a", 0.0)), float(params.get("k", 3.0)),
                              float(params.get("s", math.inf)))
        spec = model1d_exponent(model, rng=_seed_rng())
        lam = max((p.exponent for p in spec.canonical_strip), key=lambda z: z.real)
        extra = {"n_bound_filtered": spec.diagnostics.get("n_bound_filtered", 0)}
        if mode == "convergence":
            lam_inf = model1d_asymptotic_exponent(model)
            extra.update(lambda_re=lam.real, lambda_im=lam.imag,
                         deviation_from_asymptote=abs(lam - lam_inf))
        return RowResult(point, lam.real, spec.stability, len(spec.canonical_strip),
                         None, (time.perf_counter() - t0) * 1e3, extra=extra)
    except MemfloError as exc:
        return RowResult(point, None, None, None, None,
                         (time.perf_counter() - t0) * 1e3, error_code=_code(exc))


def _eval_tl(params: dict, n_harmonics: int, mode: str) -> RowResult:
    t0 = time.perf_counter()
    point = (params.get("_p1"), params.get("_p2"))
    try:
        model = TlResonatorModel(float(params.get("R", 1.0)), float(params.get("Ra", 0.0)),
                                 float(params.get("Z0", 1.0)), float(params.get("tau_f", 1.0)))
        spec = tl_spectrum(model, n_roots=int(params.get("n_roots", 5)))
        lam = spec.canonical_strip[0].exponent
        extra = {"reflection_coefficient": spec.diagnostics["reflection_coefficient"]}
        return RowResult(point, lam.real, spec.stability, len(spec.canonical_strip),
                         None, (time.perf_counter() - t0) * 1e3, extra=extra)
    except MatchedLine as exc:
        return RowResult(point, None, None, None, None,
                         (time.perf_counter() - t0) * 1e3, error_code="matched_line")
    except (MemfloError, ValueError) as exc:
        return RowResult(point, None, None, None, None,
                         (time.perf_counter() - t0) * 1e3, error_code=_code(exc))


def _eval_particle(params: dict, n_harmonics: int, mode: str,
                   warm=None) -> tuple[RowResult, object]:
    t0 = time.perf_counter()
    ratio = float(params.get("ratio", 1.0))
    omega1 = float(params.get("omega1", 2.0))
    point = (params.get("_p1"), params.get("_p2"))
    try:
        model = BrownianParticleModel(
            float(params.get("alpha", 1.0)), float(params.get("beta", 1.0)),
            float(params.get("g", 0.0)), float(params.get("k", 1.0)),
            (omega1, omega1 / ratio), float(params.get("mass", 1.0)))
        cycle, spec = particle_spectrum(model, n_harmonics=n_harmonics, seed=warm)
        amp = cycle_amplitude(cycle)
        extra = {"cycle_amplitude": amp, "period": cycle.period,
                 "cycle_exists": amp > CYCLE_AMPLITUDE_TOL}
        row = RowResult(point, spec.max_nontrivial_re(), spec.stability,
                        len(spec.canonical_strip), cycle.residual,
                        (time.perf_counter() - t0) * 1e3, extra=extra)
        warm_next = cycle if amp > CYCLE_AMPLITUDE_TOL else None
        return row, warm_next
    except (MemfloError, ValueError) as exc:
        return RowResult(point, None, None, None, None,
                         (time.perf_counter() - t0) * 1e3, error_code=_code(exc)), None


def _code(exc) -> str:
    return {
        NoCycle: "no_cycle",
        NoConvergence: "no_convergence",
        MatchedLine: "matched_line",
    }.get(type(exc), type(exc).__name__.lower())


def _grid(config: SweepConfig):
    """Row-major grid over the ranged parameters; chains share warm starts."""
    ranged = config.ranged_names()
    fixed = config.fixed_values()
    if not ranged:
        return [[(0, dict(fixed, _p1=None, _p2=None))]]
    first = config.parameters[ranged[0]].values()
    if len(ranged) == 1:
        points = [dict(fixed, **{ranged[0]: v}, _p1=float(v), _p2=None) for v in first]
        if config.model == "particle":
            return [[(i, pt) for i, pt in enumerate(points)]]  # one warm-start chain
        return [[(i, pt)] for i, pt in enumerate(points)]
    second = config.parameters[ranged[1]].values()
    chains = []
    idx = 0
    for v1 in first:
        chain = []
        for v2 in second:
            pt = dict(fixed, **{ranged[0]: float(v1), ranged[1]: float(v2)},
                      _p1=float(v1), _p2=float(v2))
            chain.append((idx, pt))
            idx += 1
        chains.append(chain)
    return chains


def _run_chain(model: str, mode: str, n_harmonics: int, chain) -> list[tuple[int, RowResult]]:
    out = []
    warm = None
    for idx, params in chain:
        if model == "memory1d":
            row = _eval_memory1d(params, n_harmonics, mode)
        elif model == "tl":
            row = _eval_tl(params, n_harmonics, mode)
        else:
            row, warm = _eval_particle(params, n_harmonics, mode, warm=warm)
        out.append((idx, row))
    return out


def _bisect_value(row: RowResult) -> float:
    """Scalar whose sign change the bisection hunts.

    The exponent real part of a converged periodic state; points without one
    (failed rows, matched lines, cycle-free regimes) sit on the positive side,
    so the located boundary is where a stably oscillating state appears or
    loses stability.
    """
    if row.error_code or row.max_re_lambda is None:
        return 1.0
    if row.extra.get("cycle_exists") is False:
        return 1.0
    return row.max_re_lambda


def _bisect_scalar(point_eval, values: np.ndarray, tol: float):
    """Bracket a sign change of the row scalar along the scan; bisect it.

    Returns (rows, history, boundary or None).
    """
    rows = []
    signs = []
    for v in values:
        row = point_eval(float(v))
        rows.append(row)
        val = _bisect_value(row)
        signs.append(math.copysign(1.0, val) if val != 0 else 0.0)
    bracket = None
    for i in range(len(values) - 1):
        if signs[i] != signs[i + 1]:
            bracket = (float(values[i]), float(values[i + 1]))
            break
    history = []
    if bracket is None:
        return rows, history, None
    lo, hi = bracket
    sign_lo = math.copysign(1.0, _bisect_value(point_eval(lo)))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        row = point_eval(mid)
        rows.append(row)
        val = _bisect_value(row)
        history.append({"lo": lo, "hi": hi, "mid": mid,
                        "max_re_lambda": row.max_re_lambda,
                        "scalar": val})
        if math.copysign(1.0, val) == sign_lo:
            lo = mid
        else:
            hi = mid
    return rows, history, 0.5 * (lo + hi)


def run(config: SweepConfig, jobs: int = 1) -> SweepResult:
    """Execute a validated config; deterministic row order, per-row errors."""
    started = time.time()
    meta = {
        "config": _config_echo(config),
        "library_version": __version__,
    }
    if config.mode == "boundary_bisect":
        name = config.ranged_names()[0]
        values = config.parameters[name].values()
        fixed = config.fixed_values()

        def point_eval(v: float) -> RowResult:
            params = dict(fixed, **{name: v}, _p1=v, _p2=None)
            if config.model == "memory1d":
                return _eval_memory1d(params, config.n_harmonics, config.mode)
            if config.model == "tl":
                return _eval_tl(params, config.n_harmonics, config.mode)
            return _eval_particle(params, config.n_harmonics, config.mode)[0]

        rows, history, boundary = _bisect_scalar(point_eval, values, config.bisect_tol)
        meta["bisect"] = {"parameter": name, "history": history, "boundary": boundary,
                          "tolerance": config.bisect_tol}
    else:
        chains = _grid(config)
        indexed: list = []
        if jobs > 1 and len(chains) > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_run_chain, config.model, config.mode,
                                       config.n_harmonics, chain) for chain in chains]
                for fut in futures:
                    indexed.extend(fut.result())
        else:
            for chain in chains:
                indexed.extend(_run_chain(config.model, config.mode,
                                          config.n_harmonics, chain))
        indexed.sort(key=lambda t: t[0])
        rows = [row for _, row in indexed]

    meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started))
    meta["total_walltime_ms"] = (time.time() - started) * 1e3
    meta["row_walltimes_ms"] = [r.walltime_ms for r in rows]
    result = SweepResult(rows, meta)
    if config.output_path:
        with open(config.output_path, "wb") as fh:
            fh.write(emit(result, config.output_format))
    return result


def _config_echo(config: SweepConfig) -> dict:
    params = {}
    for key, val in config.parameters.items():
        if isinstance(val, LinearRange):
            params[key] = {"range": [val.start, val.stop, val.count]}
        else:
            params[key] = val
    return {"model": config.model, "mode": config.mode, "parameters": params,
            "n_harmonics": config.n_harmonics, "format": config.output_format,
            "bisect_tol": config.bisect_tol}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    return str(value)


def emit(result: SweepResult, fmt: str) -> bytes:
    """Serialize rows; CSV has the fixed header, JSON a stable field order."""
    if fmt == "csv":
        lines = [CSV_HEADER]
        for r in result.rows:
            p1 = r.params[0] if r.params else None
            p2 = r.params[1] if len(r.params) > 1 else None
            lines.append(",".join([
                _fmt(float(p1) if p1 is not None else None),
                _fmt(float(p2) if p2 is not None else None),
                _fmt(r.max_re_lambda),
                r.verdict or "",
                _fmt(r.n_classes),
                _fmt(r.cycle_residual),
                r.error_code or "",
            ]))
        return ("\n".join(lines) + "\n").encode()
    if fmt == "json":
        rows = []
        for r in result.rows:
            rows.append({
                "param1": r.params[0] if r.params else None,
                "param2": r.params[1] if len(r.params) > 1 else None,
                "max_re_lambda": r.max_re_lambda,
                "verdict": r.verdict,
                "n_classes": r.n_classes,
                "cycle_residual": r.cycle_residual,
                "error_code": r.error_code,
                "extra": r.extra,
            })
        doc = {"header": CSV_HEADER.split(","), "rows": rows, "metadata": result.metadata}
        return (json.dumps(_json_safe(doc), indent=2, allow_nan=False) + "\n").encode()
    raise ConfigError(f"unknown output format {fmt!r}")


# --- entry point --------------------------------------------------------------


def _json_safe(obj):
    """Standard-JSON view: non-finite floats become strings, complex pairs."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not math.isfinite(obj):
        return _fmt(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="memflo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a sweep/spectrum/bisection config")
    run_p.add_argument("config", help="path to a key=value or JSON config file")
    run_p.add_argument("--out", help="output file (overrides the config)")
    run_p.add_argument("--format", choices=("csv", "json"), help="output format override")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel worker count")

    sub.add_parser("selfcheck", help="run the embedded oracle suite")

    args = parser.parse_args(argv)
    if args.command == "selfcheck":
        from .oracles import selfcheck

        failures = 0
        for name, ok, detail in selfcheck():
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
            failures += 0 if ok else 1
        return 1 if failures else 0

    try:
        config = parse_config(args.config)
        if args.out:
            config.output_path = args.out
        if args.format:
            config.output_format = args.format
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    result = run(config, jobs=args.jobs)
    if config.output_path:
        print(f"wrote {config.output_path} ({len(result.rows)} rows)")
    else:
        sys.stdout.write(emit(result, config.output_format).decode())
    if config.mode == "boundary_bisect":
        boundary = result.metadata.get("bisect", {}).get("boundary")
        print(f"boundary {config.ranged_names()[0]} = {_fmt(boundary)}"
              if boundary is not None else "no sign change bracketed")
    return 2 if result.failed else 0


if __name__ == "__main__":
    sys.exit(main())
