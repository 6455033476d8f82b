"""Command-line front end: channel spec files in, result files with manifests out.

Spec files are JSON objects with nested-list arrays; index order is
p_s[s], w[x][s][y], design_p_ux_given_s[s][u][x].  Every result file
embeds a manifest holding the command, the fully resolved parameters, the
renormalized spec and its hash; `rerun` re-executes a manifest and must
reproduce the original file byte for byte.  Worker count for the lattice
search comes from the GPEXP_WORKERS environment variable.

Exit codes: 0 success, 2 validation, 3 comparison failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings

import numpy as np

from . import __version__
from .channel import Channel
from .codec import CodeParams, DecoderConfig
from .core import Mode
from .exponents import ExponentQuery, exponent_pair, sweep
from .sim import SimStats, TrialConfig, compare_to_bound, empirical_exponent, run_trials

__all__ = ["main", "normalize_spec", "load_spec", "instance_hash"]

_SPEC_COMMENT = "index order: p_s[s]; w[x][s][y]; design_p_ux_given_s[s][u][x]"
_CSV_MANIFEST_PREFIX = "# manifest: "


# ---------------------------------------------------------------------------
# spec files
# ---------------------------------------------------------------------------


def _renorm_exact(row: np.ndarray, label: str) -> tuple[np.ndarray, bool]:
    """Scale a row to sum exactly to 1.0; error beyond the 1e-9 gate."""
    total = float(row.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{label} sums to {total!r}, outside the 1e-9 tolerance")
    if total == 1.0:
        return row, False
    out = row / total
    # nudge the largest entry until the float sum is exactly 1, so a
    # reparse of the serialized spec is a no-op
    for _ in range(10):
        gap = 1.0 - float(out.sum())
        if gap == 0.0:
            break
        out[int(np.argmax(out))] += gap
    return out, True


def _spec_array(raw: dict, field: str, ndim: int) -> np.ndarray:
    if field not in raw:
        raise ValueError(f"spec field '{field}' is missing")
    try:
        arr = np.array(raw[field], dtype=np.float64)
    except (TypeError, ValueError):
        raise ValueError(f"spec field '{field}' is not a numeric array") from None
    if arr.ndim != ndim or arr.size == 0:
        raise ValueError(f"spec field '{field}' must be a nonempty {ndim}-D array")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"spec field '{field}' has negative or non-finite entries")
    return arr


def normalize_spec(raw: dict) -> dict:
    """Validate and renormalize a parsed spec; the result is a fixed point.

    Probability rows are renormalized to sum exactly to 1.0 (a UserWarning
    is emitted when anything changes).  Alphabet sizes are cross-checked
    against the arrays; u above |X||S|+1 is rejected, below it warns.
    """
    if not isinstance(raw, dict):
        raise ValueError("spec root must be a JSON object")
    p_s = _spec_array(raw, "p_s", 1)
    w = _spec_array(raw, "w", 3)
    n_x, n_s, n_y = w.shape
    if p_s.size != n_s:
        raise ValueError("spec field 'p_s' length must match the state axis of 'w'")
    changed = []
    p_s, ch = _renorm_exact(p_s, "p_s")
    if ch:
        changed.append("p_s")
    for x in range(n_x):
        for s in range(n_s):
            w[x, s], ch = _renorm_exact(w[x, s], f"w[{x}][{s}]")
            if ch:
                changed.append(f"w[{x}][{s}]")

    spec: dict = {"comment": raw.get("comment", _SPEC_COMMENT)}
    sizes_in = raw.get("sizes", {})
    if not isinstance(sizes_in, dict):
        raise ValueError("spec field 'sizes' must be an object")
    for key, value in (("s", n_s), ("x", n_x), ("y", n_y)):
        if key in sizes_in and int(sizes_in[key]) != value:
            raise ValueError(f"spec sizes.{key}={sizes_in[key]} does not match the arrays ({value})")
    sizes = {"s": n_s, "x": n_x, "y": n_y}

    n_u = None
    if "design_p_ux_given_s" in raw:
        design = _spec_array(raw, "design_p_ux_given_s", 3)
        if design.shape[0] != n_s or design.shape[2] != n_x:
            raise ValueError("spec field 'design_p_ux_given_s' must be indexed [s][u][x]")
        n_u = design.shape[1]
        flat = design.reshape(n_s, -1)
        for s in range(n_s):
            flat[s], ch = _renorm_exact(flat[s], f"design_p_ux_given_s[{s}]")
            if ch:
                changed.append(f"design_p_ux_given_s[{s}]")
        design = flat.reshape(n_s, n_u, n_x)
    else:
        design = None
    if "u" in sizes_in:
        if n_u is not None and int(sizes_in["u"]) != n_u:
            raise ValueError("spec sizes.u does not match 'design_p_ux_given_s'")
        n_u = int(sizes_in["u"])
    if n_u is not None:
        full = n_x * n_s + 1
        if n_u > full:
            raise ValueError(f"sizes.u={n_u} exceeds the sufficient size |X||S|+1={full}")
        if n_u < full:
            warnings.warn(
                f"sizes.u={n_u} is below the sufficient size |X||S|+1={full}",
                UserWarning, stacklevel=2,
            )
        sizes["u"] = n_u

    if changed:
        warnings.warn(
            "renormalized probability rows: " + ", ".join(changed),
            UserWarning, stacklevel=2,
        )
    spec["sizes"] = sizes
    spec["p_s"] = p_s.tolist()
    spec["w"] = w.tolist()
    if design is not None:
        spec["design_p_ux_given_s"] = design.tolist()
    return spec


def load_spec(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(
            f"spec parse error in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return normalize_spec(raw)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def instance_hash(spec: dict) -> str:
    """Digest of the normalized spec; equal hashes mean the same instance."""
    return hashlib.sha256(_canonical(spec).encode("utf-8")).hexdigest()


def _spec_channel(spec: dict) -> Channel:
    return Channel(w=np.array(spec["w"]), p_s=np.array(spec["p_s"]))


# ---------------------------------------------------------------------------
# result computation from a manifest (shared by the commands and rerun)
# ---------------------------------------------------------------------------


def _finite(x: float) -> float | None:
    return None if x is None or math.isinf(x) or math.isnan(x) else float(x)


def _witness_dict(result) -> dict:
    w = result.witness
    p_ux = w.p_ux_given_s.rows.reshape(w.n_s, w.n_u, w.n_x)
    p_y = w.p_y_given_xs.rows.reshape(w.n_s, w.n_x, w.n_y).transpose(1, 0, 2)
    return {
        "p_s": w.p_s.probs.tolist(),
        "p_ux_given_s": p_ux.tolist(),
        "p_y_given_xs": p_y.tolist(),
    }


def _results_exponent(manifest: dict) -> dict:
    params = manifest["params"]
    query = ExponentQuery(
        channel=_spec_channel(manifest["spec"]),
        rate=params["rate"],
        threshold=params["threshold"],
        alpha=params["alpha"],
        mode=Mode(params["mode"]),
        lattice_denominator=params["lattice"],
        n_u=params["u_size"],
    )
    points = []
    if params["sweep_axis"] is not None:
        for pt in sweep(query, params["sweep_axis"], params["grid"]):
            if pt.error is not None:
                points.append({
                    "axis_value": pt.axis_value, "e1": None, "e2": None,
                    "branch_e1": None, "witness_e1": None, "witness_e2": None,
                    "error": pt.error,
                })
            else:
                points.append({
                    "axis_value": pt.axis_value,
                    "e1": _finite(pt.e1.value), "e2": _finite(pt.e2.value),
                    "branch_e1": pt.e1.branch,
                    "witness_e1": _witness_dict(pt.e1), "witness_e2": _witness_dict(pt.e2),
                    "error": None,
                })
    else:
        r1, r2 = exponent_pair(query)
        points.append({
            "axis_value": None,
            "e1": _finite(r1.value), "e2": _finite(r2.value),
            "branch_e1": r1.branch,
            "witness_e1": _witness_dict(r1), "witness_e2": _witness_dict(r2),
            "error": None,
        })
    return {"sweep_axis": params["sweep_axis"], "points": points}


def _estimate_dict(est, quantity: str) -> dict:
    return {
        "quantity": quantity,
        "count": est.count,
        "trials": est.trials,
        "n": est.n,
        "point": _finite(est.point),
        "floor": est.floor,
        "censored": est.censored,
    }


def _results_simulate(manifest: dict) -> dict:
    params = manifest["params"]
    spec = manifest["spec"]
    if "design_p_ux_given_s" not in spec:
        raise ValueError("simulate needs 'design_p_ux_given_s' in the spec file")
    channel = _spec_channel(spec)
    code = CodeParams(
        n=params["blocklength"],
        rate=params["rate"],
        epsilon=params["epsilon"],
        design=np.array(spec["design_p_ux_given_s"]),
        seed=params["seed"],
    )
    decoder = DecoderConfig(
        mode=Mode(params["mode"]), threshold=params["threshold"], alpha=params["alpha"],
    )
    config = TrialConfig(
        channel=channel,
        code=code,
        decoder=decoder,
        trials=params["trials"],
        seed=params["seed"],
        message_policy=params["message_policy"],
        codebook_batch=params["codebook_batch"],
    )
    stats = run_trials(config)
    if decoder.mode is Mode.ERASURE and stats.count_e2 > stats.count_e1:
        raise RuntimeError("accounting invariant violated: count_e2 > count_e1")
    n = params["blocklength"]
    e1_est = empirical_exponent(stats.count_e1, stats.n_trials, n)
    if decoder.mode is Mode.ERASURE:
        e2_est = empirical_exponent(stats.count_e2, stats.n_trials, n)
        quantity = "count_e2"
    else:
        e2_est = empirical_exponent(stats.sum_incorrect_list, stats.n_trials, n)
        quantity = "sum_incorrect_list"
    return {
        "stats": {
            "n_trials": stats.n_trials,
            "count_e1": stats.count_e1,
            "count_e2": stats.count_e2,
            "sum_incorrect_list": stats.sum_incorrect_list,
            "count_erased": stats.count_erased,
            "count_encoding_error": stats.count_encoding_error,
        },
        "estimates": {
            "e1": _estimate_dict(e1_est, "count_e1"),
            "e2": _estimate_dict(e2_est, quantity),
        },
    }


def _results_compare(manifest: dict) -> dict:
    exp_payload = manifest["inputs"]["exponent"]
    sim_payload = manifest["inputs"]["sim"]
    sim_man = sim_payload["manifest"]
    points = exp_payload["results"]["points"]
    if len(points) != 1 or points[0]["error"] is not None:
        raise ValueError("compare needs an exponent file with exactly one clean point")
    spec = sim_man["spec"]
    n = sim_man["params"]["blocklength"]
    design = np.array(spec["design_p_ux_given_s"])
    stats = SimStats(**sim_payload["results"]["stats"])
    bound_e1 = points[0]["e1"]
    bound_e2 = points[0]["e2"]
    if bound_e1 is None or bound_e2 is None:
        raise ValueError("exponent file carries no finite bounds to compare against")
    report = compare_to_bound(
        stats,
        Mode(sim_man["params"]["mode"]),
        n,
        e1_bound=bound_e1,
        e2_bound=bound_e2,
        n_u=design.shape[1],
        n_s=len(spec["p_s"]),
        n_x=len(spec["w"]),
        n_y=len(spec["w"][0][0]),
        slack=manifest["params"]["slack"],
    )
    return report.to_dict()


_RESULT_FUNCS = {
    "exponent": _results_exponent,
    "simulate": _results_simulate,
    "compare": _results_compare,
}


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _payload_json(payload: dict) -> bytes:
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _payload_csv(payload: dict) -> bytes:
    manifest = payload["manifest"]
    results = payload["results"]
    buf = io.StringIO()
    buf.write(_CSV_MANIFEST_PREFIX + _canonical(manifest) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    command = manifest["command"]
    if command == "exponent":
        writer.writerow(["axis", "axis_value", "e1", "e2", "branch_e1", "error"])
        axis = results["sweep_axis"]
        for pt in results["points"]:
            writer.writerow([
                _csv_cell(axis), _csv_cell(pt["axis_value"]), _csv_cell(pt["e1"]),
                _csv_cell(pt["e2"]), _csv_cell(pt["branch_e1"]), _csv_cell(pt["error"]),
            ])
    elif command == "simulate":
        writer.writerow(["quantity", "value"])
        for key, value in results["stats"].items():
            writer.writerow([key, _csv_cell(value)])
        for name in ("e1", "e2"):
            est = results["estimates"][name]
            for key in ("point", "floor", "censored"):
                writer.writerow([f"{name}_{key}", _csv_cell(est[key])])
    elif command == "compare":
        writer.writerow(["name", "bound", "slack", "count", "trials",
                         "point", "floor", "censored", "passed"])
        for entry in results["entries"]:
            writer.writerow([
                entry["name"], _csv_cell(entry["bound"]), _csv_cell(entry["slack"]),
                _csv_cell(entry["count"]), _csv_cell(entry["trials"]),
                _csv_cell(entry["point"]), _csv_cell(entry["floor"]),
                _csv_cell(entry["censored"]), _csv_cell(entry["passed"]),
            ])
        writer.writerow(["overall", "", "", "", "", "", "", "", _csv_cell(results["passed"])])
    else:
        raise ValueError(f"no CSV layout for command {command!r}")
    return buf.getvalue().encode("utf-8")


def _emit(payload: dict, fmt: str, out: str | None) -> None:
    data = _payload_json(payload) if fmt == "json" else _payload_csv(payload)
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def _read_payload(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith(_CSV_MANIFEST_PREFIX):
        manifest = json.loads(text.splitlines()[0][len(_CSV_MANIFEST_PREFIX):])
        return {"manifest": manifest, "results": None}
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not a result file: {exc.msg}") from None
    if not isinstance(payload, dict) or "manifest" not in payload:
        raise ValueError(f"{path} has no embedded manifest")
    return payload


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _resolve_u_size(args_u: int | None, spec: dict) -> int:
    full = spec["sizes"]["x"] * spec["sizes"]["s"] + 1
    if args_u is not None:
        if args_u > full:
            raise ValueError(f"--u-size {args_u} exceeds the sufficient size |X||S|+1={full}")
        return args_u
    return spec["sizes"].get("u", full)


def _cmd_exponent(args) -> int:
    spec = load_spec(args.spec)
    grid = None
    if args.sweep_axis is not None:
        if args.grid is None:
            raise ValueError("--sweep-axis needs --grid")
        grid = [float(v) for v in args.grid.split(",") if v.strip() != ""]
        if not grid:
            raise ValueError("sweep grid must be nonempty")
    elif args.grid is not None:
        raise ValueError("--grid needs --sweep-axis")
    manifest = {
        "command": "exponent",
        "version": __version__,
        "lattice": args.lattice,
        "seed": None,
        "params": {
            "mode": args.mode,
            "rate": args.rate,
            "threshold": args.threshold,
            "alpha": args.alpha,
            "lattice": args.lattice,
            "u_size": _resolve_u_size(args.u_size, spec),
            "sweep_axis": args.sweep_axis,
            "grid": grid,
            "format": args.format,
        },
        "spec": spec,
        "instance_hash": instance_hash(spec),
    }
    payload = {"manifest": manifest, "results": _results_exponent(manifest)}
    _emit(payload, args.format, args.out)
    return 0


def _cmd_simulate(args) -> int:
    spec = load_spec(args.spec)
    batch = None if args.codebook_batch in (None, "none") else int(args.codebook_batch)
    manifest = {
        "command": "simulate",
        "version": __version__,
        "lattice": None,
        "seed": args.seed,
        "params": {
            "mode": args.mode,
            "rate": args.rate,
            "threshold": args.threshold,
            "alpha": args.alpha,
            "blocklength": args.blocklength,
            "epsilon": args.epsilon,
            "trials": args.trials,
            "seed": args.seed,
            "message_policy": args.message_policy,
            "codebook_batch": batch,
            "format": args.format,
        },
        "spec": spec,
        "instance_hash": instance_hash(spec),
    }
    payload = {"manifest": manifest, "results": _results_simulate(manifest)}
    _emit(payload, args.format, args.out)
    return 0


def _cmd_compare(args) -> int:
    exp_payload = _read_payload(args.exponent_file)
    sim_payload = _read_payload(args.sim_file)
    if exp_payload["results"] is None or sim_payload["results"] is None:
        raise ValueError("compare needs JSON result files (CSV files carry no results)")
    exp_man = exp_payload["manifest"]
    sim_man = sim_payload["manifest"]
    if exp_man["command"] != "exponent" or sim_man["command"] != "simulate":
        raise ValueError("compare needs one exponent result file and one simulate result file")
    if exp_man["instance_hash"] != sim_man["instance_hash"]:
        raise ValueError("instance hashes differ; refusing to compare")
    for key in ("mode", "rate", "threshold", "alpha"):
        if exp_man["params"][key] != sim_man["params"][key]:
            raise ValueError(f"parameter {key!r} differs between the runs; refusing to compare")
    manifest = {
        "command": "compare",
        "version": __version__,
        "lattice": exp_man["lattice"],
        "seed": sim_man["seed"],
        "params": {"slack": args.slack, "format": args.format},
        "inputs": {"exponent": exp_payload, "sim": sim_payload},
        "instance_hash": exp_man["instance_hash"],
    }
    results = _results_compare(manifest)
    payload = {"manifest": manifest, "results": results}
    _emit(payload, args.format, args.out)
    return 0 if results["passed"] else 3


def _cmd_rerun(args) -> int:
    payload = _read_payload(args.input)
    manifest = payload["manifest"]
    command = manifest.get("command")
    if command not in _RESULT_FUNCS:
        raise ValueError(f"manifest has unknown command {command!r}")
    results = _RESULT_FUNCS[command](manifest)
    new_payload = {"manifest": manifest, "results": results}
    _emit(new_payload, manifest["params"]["format"], args.out)
    if command == "compare" and not results["passed"]:
        return 3
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", required=True, help="channel spec file (JSON)")
    p.add_argument("--mode", required=True, choices=["erasure", "list"])
    p.add_argument("--rate", required=True, type=float, help="code rate in bits")
    p.add_argument("--threshold", required=True, type=float, help="decoder threshold T in bits")
    p.add_argument("--alpha", required=True, type=float, help="competitor weight")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", help="output path (default: stdout)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpexp",
        description="Error exponents and Monte Carlo validation for "
                    "state-dependent channels with encoder side information.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponent", help="exact lattice search for the exponent pair")
    _add_common_model_flags(p)
    p.add_argument("--lattice", required=True, type=int, help="simplex lattice denominator d")
    p.add_argument("--u-size", type=int, default=None,
                   help="auxiliary alphabet size (default: |X||S|+1, or spec sizes.u)")
    p.add_argument("--sweep-axis", choices=["rate", "threshold", "alpha"], default=None)
    p.add_argument("--grid", default=None, help="comma-separated sweep values")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_exponent)

    p = sub.add_parser("simulate", help="Monte Carlo trials of the binning code")
    _add_common_model_flags(p)
    p.add_argument("--blocklength", required=True, type=int)
    p.add_argument("--epsilon", required=True, type=float, help="bin-depth slack in bits")
    p.add_argument("--trials", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--message-policy", choices=["fixed", "uniform"], default="fixed")
    p.add_argument("--codebook-batch", default="1000",
                   help="trials per fresh codebook, or 'none' for a single codebook")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("compare", help="check simulated exponents against computed bounds")
    p.add_argument("--exponent-file", required=True, help="JSON result of 'exponent'")
    p.add_argument("--sim-file", required=True, help="JSON result of 'simulate'")
    p.add_argument("--slack", type=float, default=None,
                   help="allowance in bits (default: |U||S||X||Y| log2(n+1)/n)")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("rerun", help="re-execute a result file's manifest")
    p.add_argument("--input", required=True, help="result file (JSON or CSV)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(handler=_cmd_rerun)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
