"""Command-line front end.

Subcommands: ``mechanism`` (one private-release draw), ``gaps`` (ensemble
gap statistics), ``dyson`` / ``dyson couple`` (eigenvalue diffusion runs),
``sweep`` (utility scaling over dimension), ``verify`` (invariant suite).

Every run writes a JSON envelope {schema_version, manifest, payload} whose
manifest records the resolved configuration, master seed, RNG provenance,
version, and timestamps; plot-ready CSVs are emitted alongside and listed
in the manifest.  Exit codes: 0 success, 1 runtime failure, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .dyson import (
    DysonConfig,
    gap_order_violations,
    simulate,
    simulate_coupled,
)
from .experiments import (
    SweepConfig,
    dimension_sweep,
    eigengap_condition_check,
    SpectrumSpec,
)
from .linalg import hermitian_eig, rank_k_truncate, real_part, frobenius_distance
from .mechanisms import (
    PrivacyParams,
    complex_gaussian_mechanism,
    real_gaussian_mechanism,
)
from .randmat import (
    GapTailEstimate,
    RigidityFactor,
    empirical_gap_cdf,
    gap_tail_exponent,
    sample_ensemble_eigenvalues,
)
from .rng import rng_metadata, substream
from .serialize import (
    format_float,
    load_input_matrix,
    load_vector,
    matrix_to_dict,
)
from .verify import run_verify

SCHEMA_VERSION = 1
OUT_DIR_ENV = "DPCOV_OUT_DIR"

PLOT_KINDS = ("trajectory", "gap-cdf", "sweep")


def _resolve_out(path: str) -> str:
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _manifest(command: str, config: dict, seed, outputs: list[str],
              started: str) -> dict:
    return {
        "command": command,
        "config": config,
        "master_seed": seed,
        "artifact_version": __version__,
        "rng": rng_metadata(),
        "started": started,
        "finished": _now(),
        "outputs": outputs,
    }


def _write_envelope(path: str, manifest: dict, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(
            {"schema_version": SCHEMA_VERSION, "manifest": manifest,
             "payload": payload},
            fh,
            indent=2,
        )
        fh.write("\n")


def emit_plot_data(payload: dict, kind: str, path: str) -> None:
    """Write one plot-ready CSV with a fixed, documented column order.

    Kinds: ``trajectory`` (t, gamma_1..gamma_d), ``gap-cdf``
    (s, p_hat, ci_lo, ci_hi), ``sweep`` (d, rms_strong_complex,
    rms_strong_real, rms_weak_complex, rms_weak_real, bound_value).
    Byte output is deterministic for identical payloads.
    """
    if kind == "trajectory":
        times = payload["times"]
        states = payload["states"]
        d = len(states[0])
        header = "t," + ",".join(f"gamma_{i + 1}" for i in range(d))
        lines = [header]
        for t, row in zip(times, states):
            lines.append(",".join([format_float(t)] + [format_float(x) for x in row]))
    elif kind == "gap-cdf":
        cols = ("s", "p_hat", "ci_lo", "ci_hi")
        missing = [c for c in cols if c not in payload]
        if missing:
            raise ValueError(f"gap-cdf payload missing columns {missing}")
        lines = [",".join(cols)]
        for vals in zip(*(payload[c] for c in cols)):
            lines.append(",".join(format_float(v) for v in vals))
    elif kind == "sweep":
        cols = (
            "d",
            "rms_strong_complex",
            "rms_strong_real",
            "rms_weak_complex",
            "rms_weak_real",
            "bound_value",
        )
        lines = [",".join(cols)]
        for row in payload["rows"]:
            lines.append(
                ",".join(
                    [str(int(row["d"]))]
                    + [format_float(row[c]) for c in cols[1:]]
                )
            )
    else:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None,
                        help="JSON file of defaults; explicit flags win")


def _merge(args: argparse.Namespace, defaults: dict,
           parser: argparse.ArgumentParser) -> dict:
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
    merged = {}
    for key, hard in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key, hard)
        merged[key] = value
    if "seed" in merged and merged["seed"] is None:
        parser.error("--seed is required (stochastic command; no wall-clock seeding)")
    return merged


def _cmd_mechanism(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="dpcov mechanism")
    parser.add_argument("--input", required=True)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--variant", choices=("complex", "real"), default=None)
    parser.add_argument("--out", required=True)
    parser.add_argument("--allow-non-psd", dest="allow_non_psd",
                        action="store_const", const=True, default=None)
    _add_config_flag(parser)
    args = parser.parse_args(argv)
    cfg = _merge(args, {
        "k": 1, "epsilon": 1.0, "delta": 0.05, "seed": None,
        "variant": "complex", "allow_non_psd": False,
    }, parser)
    started = _now()
    m = load_input_matrix(args.input)
    params = PrivacyParams(epsilon=cfg["epsilon"], delta=cfg["delta"])
    mech = (complex_gaussian_mechanism if cfg["variant"] == "complex"
            else real_gaussian_mechanism)
    t0 = time.perf_counter()
    out = mech(m, cfg["k"], params, (cfg["seed"],),
               allow_indefinite=cfg["allow_non_psd"])
    mech_s = time.perf_counter() - t0
    m_k = real_part(rank_k_truncate(hermitian_eig(m.to_hermitian()), cfg["k"]))
    payload = {
        "y": matrix_to_dict(out.y),
        "m_hat_values": [float(v) for v in out.m_hat_values.coords],
        "utility_frobenius": frobenius_distance(out.y, m_k),
        "utility_weak": frobenius_distance(out.y, m) - frobenius_distance(m_k, m),
        "params": {
            "epsilon": params.epsilon,
            "delta": params.delta,
            "noise_scale_T": params.noise_scale_T,
        },
        "seed": cfg["seed"],
        "variant": cfg["variant"],
        "timings": {"mechanism_s": mech_s},
    }
    out_path = _resolve_out(args.out)
    config = dict(cfg, input=args.input, out=args.out)
    _write_envelope(out_path, _manifest("mechanism", config, cfg["seed"],
                                        [out_path], started), payload)
    return 0


def _cmd_gaps(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="dpcov gaps")
    parser.add_argument("--ensemble", choices=("gue", "goe"), default=None)
    parser.add_argument("--d", type=int, default=None)
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--index", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", required=True)
    _add_config_flag(parser)
    args = parser.parse_args(argv)
    cfg = _merge(args, {
        "ensemble": "gue", "d": 32, "n": 20000, "index": None, "seed": None,
    }, parser)
    started = _now()
    d = cfg["d"]
    index = cfg["index"] if cfg["index"] is not None else d // 2
    samples = sample_ensemble_eigenvalues(d, cfg["ensemble"], cfg["n"],
                                          substream(cfg["seed"]))
    scale = 1.0 / (RigidityFactor(d).value * math.sqrt(d))
    table = empirical_gap_cdf(samples, index, scale)
    estimate = gap_tail_exponent(samples, index, table=table)
    if isinstance(estimate, GapTailEstimate):
        est_payload = {
            "underpowered": False,
            "slope": estimate.slope,
            "intercept": estimate.intercept,
            "fit_range": list(estimate.fit_range),
            "r_squared": estimate.r_squared,
            "n_points": estimate.n_points,
        }
    else:
        est_payload = {
            "underpowered": True,
            "n_points": estimate.n_points,
            "hit_counts": list(estimate.hit_counts),
        }
    payload = {
        "ensemble": cfg["ensemble"],
        "d": d,
        "n": cfg["n"],
        "index": index,
        "scale": scale,
        "cdf": {
            "s": [float(v) for v in table.s],
            "p_hat": [float(v) for v in table.p_hat],
            "ci_lo": [float(v) for v in table.ci_lo],
            "ci_hi": [float(v) for v in table.ci_hi],
            "hits": [int(v) for v in table.hits],
        },
        "tail_fit": est_payload,
    }
    out_path = _resolve_out(args.out)
    csv_path = (out_path[:-5] if out_path.endswith(".json") else out_path) + ".csv"
    emit_plot_data(payload["cdf"], "gap-cdf", csv_path)
    config = dict(cfg, index=index, out=args.out)
    _write_envelope(out_path, _manifest("gaps", config, cfg["seed"],
                                        [out_path, csv_path], started), payload)
    return 0


def _cmd_dyson(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="dpcov dyson")
    parser.add_argument("--d", type=int, default=None)
    parser.add_argument("--beta", type=int, choices=(1, 2), default=None)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--t-end", dest="t_end", type=float, default=None)
    parser.add_argument("--gamma0", default=None,
                        help="JSON vector file; default all zeros")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", required=True)
    _add_config_flag(parser)
    args = parser.parse_args(argv)
    cfg = _merge(args, {
        "d": 6, "beta": 2, "dt": 1e-4, "t_end": 1.0, "seed": None,
        "gamma0": None,
    }, parser)
    started = _now()
    gamma0 = (load_vector(cfg["gamma0"]).coords if cfg["gamma0"]
              else np.zeros(cfg["d"]))
    config = DysonConfig(dim=len(gamma0), beta=cfg["beta"], dt=cfg["dt"],
                         t_end=cfg["t_end"])
    traj = simulate(gamma0, config, (cfg["seed"],))
    out_path = _resolve_out(args.out)
    emit_plot_data(
        {"times": traj.times.tolist(), "states": traj.states.tolist()},
        "trajectory",
        out_path,
    )
    manifest_path = out_path + ".manifest.json"
    run_cfg = dict(cfg, out=args.out)
    _write_envelope(
        manifest_path,
        _manifest("dyson", run_cfg, cfg["seed"], [out_path, manifest_path], started),
        {"n_records": int(traj.times.size), "dim": config.dim},
    )
    return 0


def _cmd_dyson_couple(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="dpcov dyson couple")
    parser.add_argument("--gamma0", required=True)
    parser.add_argument("--xi0", required=True)
    parser.add_argument("--beta", type=int, choices=(1, 2), default=None)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--t-end", dest="t_end", type=float, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", required=True)
    _add_config_flag(parser)
    args = parser.parse_args(argv)
    cfg = _merge(args, {
        "beta": 2, "dt": 1e-4, "t_end": 0.5, "tol": None, "seed": None,
    }, parser)
    started = _now()
    gamma0 = load_vector(args.gamma0)
    xi0 = load_vector(args.xi0)
    tol = cfg["tol"] if cfg["tol"] is not None else 1e-3 * math.sqrt(cfg["dt"])
    config = DysonConfig(dim=gamma0.dim, beta=cfg["beta"], dt=cfg["dt"],
                         t_end=cfg["t_end"])
    pair = simulate_coupled(gamma0, xi0, config, (cfg["seed"],))
    report = gap_order_violations(pair, tol)
    payload = {
        "violations": report.violations,
        "comparisons": report.comparisons,
        "fraction": report.fraction,
        "worst_excess": report.worst_excess,
        "tol": tol,
    }
    out_path = _resolve_out(args.out)
    run_cfg = dict(cfg, gamma0=args.gamma0, xi0=args.xi0, tol=tol, out=args.out)
    _write_envelope(out_path, _manifest("dyson-couple", run_cfg, cfg["seed"],
                                        [out_path], started), payload)
    return 0


def _cmd_sweep(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="dpcov sweep")
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--dims", default=None, help="comma-separated, e.g. 16,32,64")
    parser.add_argument("--gap-multiple", dest="gap_multiple", type=float,
                        default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--reps", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", required=True)
    _add_config_flag(parser)
    args = parser.parse_args(argv)
    cfg = _merge(args, {
        "k": 2, "dims": "16,32,64,128", "gap_multiple": 8.0,
        "epsilon": 1.0, "delta": 0.05, "reps": 200, "seed": None,
    }, parser)
    started = _now()
    dims = [int(x) for x in str(cfg["dims"]).split(",") if x.strip()]
    params = PrivacyParams(epsilon=cfg["epsilon"], delta=cfg["delta"])
    sweep = dimension_sweep(
        SweepConfig(k=cfg["k"], params=params, replications=cfg["reps"],
                    master_seed=cfg["seed"], gap_multiple=cfg["gap_multiple"]),
        dims,
    )
    rows = []
    for d in sweep.dims:
        res = sweep.results[d]
        stats_c = res.per_variant.get("complex")
        stats_r = res.per_variant.get("real")
        rows.append({
            "d": d,
            "rms_strong_complex": stats_c.rms_strong if stats_c else float("nan"),
            "rms_strong_real": stats_r.rms_strong if stats_r else float("nan"),
            "rms_weak_complex": stats_c.rms_weak if stats_c else float("nan"),
            "rms_weak_real": stats_r.rms_weak if stats_r else float("nan"),
            "bound_value": res.bound_value,
        })
    gap_checks = {
        str(d): {
            "met": sweep.results[d].gap_condition_met,
            "ratio": sweep.results[d].gap_condition_ratio,
        }
        for d in sweep.dims
    }
    payload = {
        "dims": list(sweep.dims),
        "slope": sweep.slope,
        "fit_skipped": sweep.fit_skipped,
        "variant_fitted": sweep.variant_fitted,
        "rows": rows,
        "gap_condition": gap_checks,
        "per_d_metadata": {str(d): sweep.results[d].metadata for d in sweep.dims},
    }
    out_path = _resolve_out(args.out)
    csv_path = (out_path[:-5] if out_path.endswith(".json") else out_path) + ".csv"
    emit_plot_data({"rows": rows}, "sweep", csv_path)
    run_cfg = dict(cfg, dims=dims, out=args.out)
    _write_envelope(out_path, _manifest("sweep", run_cfg, cfg["seed"],
                                        [out_path, csv_path], started), payload)
    return 0


def _cmd_verify(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="dpcov verify")
    parser.add_argument("--quick", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    results = run_verify(quick=args.quick, seed=args.seed)
    ok = True
    for check in results:
        status = "ok" if check.passed else "FAIL"
        print(f"{status:4s} {check.name}: {check.detail}")
        ok &= check.passed
    return 0 if ok else 1


_COMMANDS = {
    "mechanism": _cmd_mechanism,
    "gaps": _cmd_gaps,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
}


def dispatch(argv: list[str]) -> int:
    """Route to a subcommand; returns the process exit code."""
    if not argv or argv[0] in ("-h", "--help"):
        print(
            "usage: dpcov {mechanism,gaps,dyson,sweep,verify} [options]\n"
            "       dpcov dyson couple [options]",
            file=sys.stderr if argv else sys.stdout,
        )
        return 2 if argv else 0
    name, rest = argv[0], argv[1:]
    if name == "dyson":
        handler = _cmd_dyson_couple if rest[:1] == ["couple"] else _cmd_dyson
        rest = rest[1:] if rest[:1] == ["couple"] else rest
    elif name in _COMMANDS:
        handler = _COMMANDS[name]
    else:
        print(f"dpcov: unknown subcommand {name!r}", file=sys.stderr)
        return 2
    try:
        return handler(rest)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if exc.code is not None else 0
    except Exception as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
