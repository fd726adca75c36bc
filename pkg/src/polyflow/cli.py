"""Configuration-driven entry point: runs, sweeps and verification suites.

Run specifications are flat JSON key-value files with a ``schema_version``
field (documented in the README).  Outputs per run: ``timeseries.csv`` with
a fixed column order, ``summary.json`` with initial/final functionals,
fitted rates and suite verdicts, and SVG/CSV curve snapshots with the
limiting circle overlaid.

Exit codes: 0 all requested suites pass, 2 suite failure, 3 invalid
specification, 4 singularity detected.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, flow, inequalities, oracles, shapes
from .geometry import derive_geometry

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_SUITE_FAILURE = 2
EXIT_INVALID_SPEC = 3
EXIT_SINGULARITY = 4

DEFAULT_SUITES = (
    "conservation",
    "kosc_bound",
    "identity_residual",
)

SUITE_VERDICTS = {
    "conservation": (
        "area_conservation",
        "length_monotone",
        "iso_ratio_monotone",
        "kappa_bar_monotone",
        "winding_constant",
    ),
    "kosc_bound": ("kosc_a_priori_bound",),
    "identity_residual": ("kosc_identity_residual",),
    "waiting_time": ("waiting_time_bound",),
    "embeddedness": ("embeddedness_monitor",),
    "convergence": ("circle_limit",),
}

TIMESERIES_BASE_COLUMNS = (
    "t",
    "length",
    "area",
    "iso_ratio",
    "winding",
    "kappa_bar",
    "kosc",
    "min_kappa",
    "dissipation",
)


class SpecError(ValueError):
    """The run specification file is malformed."""


def load_spec(path) -> dict:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from exc
    if not isinstance(spec, dict):
        raise SpecError("spec must be a JSON object")
    if spec.get("schema_version") != SCHEMA_VERSION:
        raise SpecError(
            f"spec schema_version must be {SCHEMA_VERSION}, "
            f"got {spec.get('schema_version')!r}"
        )
    if "shape" not in spec:
        raise SpecError("spec is missing the 'shape' key")
    return spec


def flow_config_from_spec(spec: dict) -> flow.FlowConfig:
    keys = (
        "p", "n", "scheme", "dt_policy", "dt", "eta", "safety", "t_end",
        "kosc_stop", "max_steps", "resample_every", "record_every", "m_max",
        "dealias", "track_multiplicity",
    )
    kwargs = {k: spec[k] for k in keys if k in spec}
    if "track_modes" in spec:
        kwargs["track_modes"] = tuple(int(k) for k in spec["track_modes"])
    try:
        return flow.FlowConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"invalid flow configuration: {exc}") from exc


def _float(x):
    return float(x) if x is not None and np.isfinite(x) else None


def _verdict_dict(v: diagnostics.Verdict) -> dict:
    return {
        "name": v.name,
        "holds": bool(v.holds),
        "measured": _float(v.measured),
        "bound": _float(v.bound),
        "tolerance": _float(v.tolerance),
        "detail": v.detail,
    }


def write_timeseries(path, records, m_max: int):
    columns = list(TIMESERIES_BASE_COLUMNS)
    columns += [f"norm_{m}" for m in range(m_max + 1)]
    columns += ["kosc_residual", "sup_dev", "multiplicity"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in records:
            row = [
                repr(r.t), repr(r.length), repr(r.area), repr(r.iso_ratio),
                r.winding, repr(r.kappa_bar), repr(r.kosc), repr(r.min_kappa),
                repr(r.dissipation),
            ]
            row += [repr(x) for x in r.deriv_norms]
            row += [repr(r.kosc_residual), repr(r.sup_dev)]
            row += [r.multiplicity if r.multiplicity is not None else ""]
            writer.writerow(row)


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("x", "y"))
        for x, y in curve.points:
            writer.writerow((repr(float(x)), repr(float(y))))


def write_curve_svg(path, curve, limit_radius=None, size=480):
    """Polyline snapshot with the limiting circle overlaid."""
    pts = curve.points
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = max(float((hi - lo).max()), 1e-12) * 1.2
    mid = 0.5 * (hi + lo)

    def to_px(xy):
        return (
            (xy[0] - mid[0]) / span * size + size / 2,
            -(xy[1] - mid[1]) / span * size + size / 2,
        )

    poly = " ".join(f"{x:.3f},{y:.3f}" for x, y in (to_px(q) for q in pts))
    first = to_px(pts[0])
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<polygon points="{poly}" fill="none" stroke="black" stroke-width="1"/>',
    ]
    if limit_radius is not None:
        cx, cy = to_px((0.0, 0.0))
        centroid = pts.mean(axis=0)
        cx, cy = to_px(centroid)
        r_px = limit_radius / span * size
        lines.append(
            f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{r_px:.3f}" fill="none" '
            'stroke="red" stroke-dasharray="4 3" stroke-width="1"/>'
        )
    lines.append(f'<circle cx="{first[0]:.3f}" cy="{first[1]:.3f}" r="2" fill="blue"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines))


def output_root(explicit=None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get("POLYFLOW_OUT")
    return Path(env) if env else Path("polyflow_out")


def execute(spec, out_root=None) -> int:
    """Run one specification and write its artifacts; returns an exit code."""
    if not isinstance(spec, dict):
        try:
            spec = load_spec(spec)
        except SpecError as exc:
            print(f"invalid spec: {exc}", file=sys.stderr)
            return EXIT_INVALID_SPEC

    try:
        config = flow_config_from_spec(spec)
        curve = shapes.generate_shape(spec, config.n)
    except (SpecError, ValueError) as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_INVALID_SPEC

    name = spec.get("name", "run")
    out_dir = output_root(out_root or spec.get("out_dir")) / name
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "snapshots").mkdir(exist_ok=True)

    result = flow.run(curve, config)

    suites = tuple(spec.get("suites", DEFAULT_SUITES))
    unknown = [s for s in suites if s not in SUITE_VERDICTS]
    if unknown:
        print(f"invalid spec: unknown suites {unknown}", file=sys.stderr)
        return EXIT_INVALID_SPEC

    failures = []
    for suite in suites:
        for vname in SUITE_VERDICTS[suite]:
            verdict = result.verdicts.get(vname)
            if verdict is None or not verdict.holds:
                failures.append(f"{suite}:{vname}")

    first, last = result.records[0], result.records[-1]
    limit_radius = float(np.sqrt(abs(first.area) / np.pi))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "spec": spec,
        "stop_reason": result.stop_reason,
        "steps": result.steps,
        "initial": {
            "length": first.length, "area": first.area,
            "iso_ratio": first.iso_ratio, "kosc": first.kosc,
            "winding": first.winding, "min_kappa": first.min_kappa,
        },
        "final": {
            "t": last.t, "length": last.length, "area": last.area,
            "iso_ratio": last.iso_ratio, "kosc": last.kosc,
            "kappa_bar": last.kappa_bar, "min_kappa": last.min_kappa,
        },
        "smallness_proxy": {
            "kosc0_below_0.1": bool(first.kosc <= 0.1),
            "iso0_below_1.001": bool(first.iso_ratio <= 1.001),
        },
        "limit_radius": limit_radius,
        "monitors": {
            k: (v if not isinstance(v, float) or np.isfinite(v) else None)
            for k, v in result.monitors.items()
        },
        "fits": {
            k: dataclasses.asdict(f) for k, f in sorted(result.fits.items())
        },
        "verdicts": {
            k: _verdict_dict(v) for k, v in sorted(result.verdicts.items())
        },
        "suites": {"requested": list(suites), "failures": failures},
    }
    if "waiting_time_bound" in result.verdicts:
        wt = result.verdicts["waiting_time_bound"]
        summary["measured_waiting_time"] = _float(wt.measured)
        summary["waiting_time_bound"] = _float(wt.bound)

    write_timeseries(out_dir / "timeseries.csv", result.records, config.derivative_depth)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for tag, curve_obj in (("initial", curve), (f"{last.t:.6f}", result.final_curve)):
        write_curve_csv(out_dir / "snapshots" / f"curve_{tag}.csv", curve_obj)
        write_curve_svg(
            out_dir / "snapshots" / f"curve_{tag}.svg", curve_obj, limit_radius
        )

    if result.stop_reason == "singularity":
        print(f"{name}: singularity detected at t={last.t:.6e}", file=sys.stderr)
        return EXIT_SINGULARITY
    if failures:
        print(f"{name}: failing suites: {', '.join(failures)}", file=sys.stderr)
        return EXIT_SUITE_FAILURE
    return EXIT_OK


def _execute_for_sweep(args):
    path, out_root = args
    try:
        return str(path), execute(str(path), out_root)
    except Exception as exc:  # individual failures must not kill the sweep
        print(f"{path}: {exc}", file=sys.stderr)
        return str(path), EXIT_INVALID_SPEC


def sweep(spec_dir, out_root=None, parallelism: int = 1) -> int:
    """Execute every spec file in a directory; aggregate verdicts."""
    paths = sorted(Path(spec_dir).glob("*.json"))
    results = {}
    if parallelism > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for path, code in pool.map(
                _execute_for_sweep, [(p, out_root) for p in paths]
            ):
                results[path] = code
    else:
        for p in paths:
            path, code = _execute_for_sweep((p, out_root))
            results[path] = code

    root = output_root(out_root)
    root.mkdir(parents=True, exist_ok=True)
    aggregate = {
        "runs": {Path(k).stem: v for k, v in sorted(results.items())},
        "n_runs": len(results),
        "n_failures": sum(1 for v in results.values() if v != EXIT_OK),
    }
    with open(root / "sweep.json", "w") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(aggregate, indent=2, sort_keys=True))
    return EXIT_OK if aggregate["n_failures"] == 0 else EXIT_SUITE_FAILURE


def verify(seed: int = 0, trials: int = 1000) -> int:
    """Random-function inequality suites (sharp Poincare and sup bounds)."""
    rng = np.random.default_rng(seed)
    periods = (1.0, 2.0 * np.pi, 17.3)
    violations = 0
    for period in periods:
        for _ in range(trials):
            f = inequalities.random_trig_polynomial(
                rng, n_modes=int(rng.integers(1, 21))
            )
            if not inequalities.wirtinger_check(f, period).holds:
                violations += 1
            if not inequalities.sup_bound_check(f, period).holds:
                violations += 1
        # sharp equality case: pure first harmonic
        u = np.arange(256) / 256.0
        eq = inequalities.wirtinger_check(np.cos(2.0 * np.pi * u), period)
        if not (eq.holds and eq.equality_case):
            violations += 1
        print(
            f"period {period:<10.6g} trials {trials}: "
            f"{'ok' if violations == 0 else f'{violations} violations'}"
        )
    if violations:
        print(f"FAIL: {violations} inequality violations", file=sys.stderr)
        return EXIT_SUITE_FAILURE
    print("all inequality suites passed")
    return EXIT_OK


def oracle_check(n: int = 256) -> int:
    """Cross-check the spectral pipeline against the independent oracles."""
    failures = []

    battery = [("circle", shapes.Circle(radius=1.0)), ("ellipse", shapes.Ellipse(2.0, 1.0))]
    for delta in (0.01, 0.05, 0.1):
        for k in (2, 3, 5):
            battery.append(
                (f"polar_d{delta}_k{k}", shapes.perturbed_circle(1.0, delta, k))
            )

    for name, shape in battery:
        ref = oracles.quadrature_functionals(shape)
        cache = derive_geometry(shape.sample(n), m_max=2)
        for label, got, want, tol in (
            ("length", cache.length, ref.length, 1e-9 * max(1.0, abs(ref.length))),
            ("area", cache.area, ref.area, 1e-9 * max(1.0, abs(ref.area))),
            ("kosc", cache.kosc, ref.kosc, 1e-8 * max(1.0, abs(ref.kosc))),
        ):
            if abs(got - want) > tol:
                failures.append(f"{name}.{label}: {got!r} vs {want!r}")
        poly = oracles.polygon_area(cache.curve)
        if abs(poly - cache.area) > 50.0 / n**2 * max(1.0, abs(cache.area)):
            failures.append(f"{name}.polygon_area: {poly!r} vs {cache.area!r}")
        fd = oracles.fd_curvature(cache.curve)
        theta = shape.period * np.arange(n) / n
        if np.max(np.abs(fd - shape.curvature(theta))) > 200.0 / n**2 * np.max(
            np.abs(shape.curvature(theta))
        ):
            failures.append(f"{name}.fd_curvature deviates beyond O(h^2)")

    for p in (1, 2):
        for k in (2, 3, 5, 8):
            lam = oracles.linearized_mode_rate(p, 1.0, k)
            num = oracles.circle_mode_rate_numeric(p, 1.0, k, n=n)
            if abs(num - lam) > 0.01 * abs(lam):
                failures.append(f"mode rate p={p} k={k}: {num!r} vs {lam!r}")

    for line in failures:
        print(f"FAIL {line}", file=sys.stderr)
    print(
        f"oracle battery: {len(battery)} shapes, "
        f"{'all agree' if not failures else f'{len(failures)} failures'}"
    )
    return EXIT_SUITE_FAILURE if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyflow",
        description="Polyharmonic curve flow runs, sweeps and verification suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one run specification")
    run_p.add_argument("spec", help="path to a JSON run spec")
    run_p.add_argument("--out", default=None, help="output root directory")
    run_p.add_argument("--n", type=int, default=None, help="override grid size")
    run_p.add_argument("--p", type=int, default=None, help="override flow order")
    run_p.add_argument("--dt", type=float, default=None, help="override fixed dt")
    run_p.add_argument("--scheme", default=None, help="override time scheme")

    sweep_p = sub.add_parser("sweep", help="execute every spec in a directory")
    sweep_p.add_argument("specdir", help="directory of JSON run specs")
    sweep_p.add_argument("--out", default=None)
    sweep_p.add_argument("--parallelism", type=int, default=1)

    verify_p = sub.add_parser("verify", help="random-function inequality suites")
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.add_argument("--trials", type=int, default=1000)

    oracle_p = sub.add_parser("oracle-check", help="pipeline vs oracle battery")
    oracle_p.add_argument("--n", type=int, default=256)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            spec = load_spec(args.spec)
        except SpecError as exc:
            print(f"invalid spec: {exc}", file=sys.stderr)
            return EXIT_INVALID_SPEC
        for key in ("n", "p", "dt", "scheme"):
            val = getattr(args, key)
            if val is not None:
                spec[key] = val
                if key == "dt":
                    spec["dt_policy"] = "fixed"
        return execute(spec, args.out)
    if args.command == "sweep":
        return sweep(args.specdir, args.out, args.parallelism)
    if args.command == "verify":
        return verify(seed=args.seed, trials=args.trials)
    if args.command == "oracle-check":
        return oracle_check(n=args.n)
    return EXIT_INVALID_SPEC


if __name__ == "__main__":
    sys.exit(main())
