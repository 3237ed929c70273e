"""Command-line front end: JSON config in, CSV metrics and JSON dumps out.

This is the only place where dBm exists; the core works in watts. A config is
a flat JSON object; every omitted field takes the reference-setup default, so
``{}`` is a complete config. Power-like fields accept either a number in SI
units or a string such as ``"30 dBm"`` (``"-174 dBm/Hz"`` for the noise PSD).

Subcommands:

* ``sweep --config c.json --out metrics.csv [--workers N] [--full-scale]``
  runs the configured sweep and writes ``metrics.csv``, a sibling
  ``metrics.csv.ccdf.csv`` with the scheduled-distance survival curves, and
  ``metrics.csv.manifest.json`` recording the exact resolved config.
* ``inspect --config c.json --realization i [--out dump.json]``
  dumps one realization (users, per-algorithm schedules, powers, rates,
  removal trace) for debugging.

Exit codes: 0 success, 2 invalid config, 1 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .channel import SystemConfig
from .errors import ConfigInvalid
from .schedulers import ALGORITHMS
from .simulation import (ExperimentSpec, MetricsRow, run_experiment,
                         run_realization, sum_rate)

CSV_HEADER = ("sweep_var,sweep_value,algorithm,mean_sum_rate_bpshz,"
              "mean_num_scheduled,mean_avg_rate_bpshz,p_los,p_nlos,realizations,seed")
CCDF_HEADER = "sweep_value,algorithm,r_meters,ccdf"

WORKERS_ENV_VAR = "XLMIMO_WORKERS"

FULL_SCALE_ANTENNAS = 1000
FULL_SCALE_USERS = 1000
FULL_SCALE_REALIZATIONS = 1000

_DBM_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]+)\s*dBm\s*$", re.IGNORECASE)
_DBM_HZ_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]+)\s*dBm/Hz\s*$", re.IGNORECASE)

# config key -> SystemConfig field for the plain numeric fields
_PLAIN_FIELDS = {
    "num_antennas": "num_antennas",
    "antenna_spacing_m": "antenna_spacing",
    "carrier_freq_hz": "carrier_freq",
    "bandwidth_hz": "bandwidth",
    "num_users": "num_users",
    "los_probability": "los_probability",
    "epsilon": "epsilon",
    "pathloss_exp_los": "pathloss_exp_los",
    "pathloss_exp_nlos": "pathloss_exp_nlos",
    "ref_attenuation_los": "ref_attenuation_los",
    "ref_attenuation_nlos": "ref_attenuation_nlos",
    "r_min_m": "r_min",
    "r_max_m": "r_max",
    "seed": "rng_seed",
}

_KNOWN_KEYS = set(_PLAIN_FIELDS) | {
    "tx_power_budget", "noise_psd", "min_rate_range_bpshz",
    "sweep", "algorithms", "num_realizations",
}


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def _power_watts(value, field: str) -> float:
    """A power given as watts (number) or as a '<x> dBm' string."""
    if isinstance(value, bool):
        raise ConfigInvalid(field, "expected a power, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        match = _DBM_RE.match(value)
        if match:
            return dbm_to_watts(float(match.group(1)))
    raise ConfigInvalid(field, f"expected watts or '<value> dBm', got {value!r}")


def _psd_watts_per_hz(value, field: str) -> float:
    if isinstance(value, bool):
        raise ConfigInvalid(field, "expected a spectral density, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        match = _DBM_HZ_RE.match(value)
        if match:
            return dbm_to_watts(float(match.group(1)))
    raise ConfigInvalid(field, f"expected W/Hz or '<value> dBm/Hz', got {value!r}")


def spec_from_dict(raw: dict) -> ExperimentSpec:
    """Build a validated ExperimentSpec from a JSON-decoded config object."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("<root>", "config must be a JSON object")
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigInvalid(unknown[0], "unknown config field")

    cfg_kwargs = {}
    for key, target in _PLAIN_FIELDS.items():
        if key in raw:
            cfg_kwargs[target] = raw[key]
    if "tx_power_budget" in raw:
        cfg_kwargs["tx_power_budget"] = _power_watts(raw["tx_power_budget"],
                                                     "tx_power_budget")
    if "noise_psd" in raw:
        cfg_kwargs["noise_psd"] = _psd_watts_per_hz(raw["noise_psd"], "noise_psd")
    if "min_rate_range_bpshz" in raw:
        rr = raw["min_rate_range_bpshz"]
        if not (isinstance(rr, (list, tuple)) and len(rr) == 2):
            raise ConfigInvalid("min_rate_range_bpshz", "expected [lo, hi]")
        cfg_kwargs["min_rate_range"] = (float(rr[0]), float(rr[1]))
    try:
        cfg = SystemConfig(**cfg_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid("<config>", str(exc)) from exc

    sweep = raw.get("sweep", {"variable": "p_max",
                              "values": ["0 dBm", "10 dBm", "20 dBm", "30 dBm"]})
    if not isinstance(sweep, dict) or "variable" not in sweep or "values" not in sweep:
        raise ConfigInvalid("sweep", "expected {'variable': ..., 'values': [...]}")
    variable = sweep["variable"]
    values = sweep["values"]
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigInvalid("sweep.values", "expected a non-empty list")
    if variable == "p_max":
        values = [_power_watts(v, "sweep.values") for v in values]
    else:
        try:
            values = [float(v) for v in values]
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid("sweep.values", "expected numbers") from exc

    algorithms = raw.get("algorithms", list(ALGORITHMS))
    if not isinstance(algorithms, (list, tuple)) or not algorithms:
        raise ConfigInvalid("algorithms", "expected a non-empty list")
    num_realizations = raw.get("num_realizations", FULL_SCALE_REALIZATIONS)
    if not isinstance(num_realizations, int) or isinstance(num_realizations, bool):
        raise ConfigInvalid("num_realizations", "expected an integer")

    return ExperimentSpec(config=cfg, sweep_variable=variable,
                          sweep_values=tuple(values),
                          algorithms=tuple(algorithms),
                          num_realizations=num_realizations)


def parse_config(path) -> ExperimentSpec:
    """Load and validate a JSON config file; missing fields take defaults."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("<file>", f"not valid JSON: {exc}") from exc
    return spec_from_dict(raw)


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Resolved config as a JSON object (SI units); parses back to an
    identical spec."""
    cfg = spec.config
    return {
        "num_antennas": cfg.num_antennas,
        "antenna_spacing_m": cfg.antenna_spacing,
        "carrier_freq_hz": cfg.carrier_freq,
        "bandwidth_hz": cfg.bandwidth,
        "num_users": cfg.num_users,
        "tx_power_budget": cfg.tx_power_budget,
        "los_probability": cfg.los_probability,
        "epsilon": cfg.epsilon,
        "pathloss_exp_los": cfg.pathloss_exp_los,
        "pathloss_exp_nlos": cfg.pathloss_exp_nlos,
        "ref_attenuation_los": cfg.ref_attenuation_los,
        "ref_attenuation_nlos": cfg.ref_attenuation_nlos,
        "noise_psd": cfg.noise_psd,
        "min_rate_range_bpshz": list(cfg.min_rate_range),
        "r_min_m": cfg.r_min,
        "r_max_m": cfg.r_max,
        "seed": cfg.rng_seed,
        "sweep": {"variable": spec.sweep_variable,
                  "values": list(spec.sweep_values)},
        "algorithms": list(spec.algorithms),
        "num_realizations": spec.num_realizations,
    }


def _fmt(x) -> str:
    return repr(float(x))


def write_sweep_csv(rows: list[MetricsRow], out_path: Path):
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join([
            row.sweep_variable,
            _fmt(row.sweep_value),
            row.algorithm,
            _fmt(row.mean_sum_rate),
            _fmt(row.mean_num_scheduled),
            _fmt(row.mean_avg_rate),
            _fmt(row.p_los),
            _fmt(row.p_nlos),
            str(row.num_realizations),
            str(row.seed),
        ]))
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ccdf_csv(rows: list[MetricsRow], out_path: Path):
    lines = [CCDF_HEADER]
    for row in rows:
        for r, value in zip(row.ccdf_r, row.ccdf):
            lines.append(",".join([
                _fmt(row.sweep_value), row.algorithm, _fmt(r), _fmt(value)]))
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_manifest(spec: ExperimentSpec, outputs: list[str], out_path: Path):
    manifest = {
        "artifact_version": __version__,
        "master_seed": spec.master_seed,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": spec_to_dict(spec),
        "outputs": outputs,
    }
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def cmd_sweep(spec: ExperimentSpec, out_path, workers: int = 1) -> dict:
    """Run the sweep and write the metrics CSV, the CCDF CSV, and the manifest.

    Reruns with an identical spec produce byte-identical CSVs regardless of
    worker count.
    """
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(spec, workers=workers)
    ccdf_path = Path(str(out) + ".ccdf.csv")
    manifest_path = Path(str(out) + ".manifest.json")
    write_sweep_csv(rows, out)
    write_ccdf_csv(rows, ccdf_path)
    write_manifest(spec, [str(out), str(ccdf_path)], manifest_path)
    return {"csv": str(out), "ccdf": str(ccdf_path), "manifest": str(manifest_path)}


def cmd_inspect(spec: ExperimentSpec, realization_index: int) -> dict:
    """One realization in full detail, JSON-serializable.

    Includes every user's channel vector so rates can be recomputed
    independently from the dump; expect large output at full scale.
    """
    cfg = spec.config
    outcomes = run_realization(cfg, spec.algorithms, realization_index)
    from .channel import sample_users  # population replay uses the same sub-stream
    from .simulation import realization_rngs
    population_rng, _ = realization_rngs(cfg.rng_seed, realization_index)
    users = sample_users(cfg, population_rng)

    users_dump = [{
        "index": i,
        "r_m": u.position.r,
        "theta_rad": u.position.theta,
        "state": u.state,
        "min_rate_bpshz": u.min_rate,
        "channel_real": [float(v) for v in u.channel.real],
        "channel_imag": [float(v) for v in u.channel.imag],
    } for i, u in enumerate(users)]

    algo_dump = {}
    for outcome in outcomes:
        algo_dump[outcome.algorithm] = {
            "scheduled": [int(k) for k in outcome.scheduled],
            "powers_w": [float(p) for p in outcome.allocation.powers],
            "rates_bpshz": [float(r) for r in outcome.rates],
            "min_rates_bpshz": [float(r) for r in outcome.min_rates],
            "gram_inv_diag": [float(d) for d in outcome.gram_inv_diag],
            "water_level_w": outcome.allocation.water_level,
            "feasible": outcome.allocation.feasible,
            "total_power_w": outcome.allocation.total,
            "sum_rate_bpshz": sum_rate(outcome),
            "diagnostics": _plain(outcome.diagnostics),
        }
    return {
        "realization": realization_index,
        "master_seed": cfg.rng_seed,
        "config": spec_to_dict(spec),
        "users": users_dump,
        "algorithms": algo_dump,
    }


def _plain(obj):
    """Recursively convert numpy scalars/arrays for json.dump."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV_VAR)
    if value is None:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _full_scale(spec: ExperimentSpec) -> ExperimentSpec:
    cfg = dataclasses.replace(spec.config,
                              num_antennas=FULL_SCALE_ANTENNAS,
                              num_users=FULL_SCALE_USERS)
    return dataclasses.replace(spec, config=cfg,
                               num_realizations=FULL_SCALE_REALIZATIONS)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="xlmimo",
        description="Monte-Carlo sweeps of downlink user scheduling and "
                    "power allocation on an extra-large antenna array.")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a sweep and write CSV metrics")
    sweep.add_argument("--config", required=True, help="JSON config file")
    sweep.add_argument("--out", required=True, help="output CSV path")
    sweep.add_argument("--workers", type=int, default=None,
                       help=f"parallel workers (default ${WORKERS_ENV_VAR} or 1)")
    sweep.add_argument("--full-scale", action="store_true",
                       help="force the reference scale: 1000 antennas, 1000 "
                            "users, 1000 realizations")

    inspect = sub.add_parser("inspect", help="dump one realization as JSON")
    inspect.add_argument("--config", required=True, help="JSON config file")
    inspect.add_argument("--realization", type=int, required=True)
    inspect.add_argument("--out", default=None, help="write here instead of stdout")

    args = parser.parse_args(argv)
    try:
        spec = parse_config(args.config)
        if args.command == "sweep":
            if args.full_scale:
                spec = _full_scale(spec)
            workers = args.workers if args.workers is not None else default_workers()
            paths = cmd_sweep(spec, args.out, workers=workers)
            print(f"wrote {paths['csv']}, {paths['ccdf']}, {paths['manifest']}")
        else:
            dump = cmd_inspect(spec, args.realization)
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                    json.dump(dump, fh, indent=2)
                    fh.write("\n")
                print(f"wrote {args.out}")
            else:
                json.dump(dump, sys.stdout, indent=2)
                sys.stdout.write("\n")
    except ConfigInvalid as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to a distinct exit code
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
