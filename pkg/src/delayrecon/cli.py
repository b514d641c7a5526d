"""Batch experiment runner: JSON config in, CSV/JSON artifacts out.

Exit codes: 0 success, 2 when a checked mathematical precondition fails
(e.g. the periodic-set dimension check), 1 on operational errors.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from . import core, delay, genericity, systems, topology

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HYPOTHESIS = 2


class ConfigError(ValueError):
    pass


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"config field {key!r} is missing")
    return config[key]


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")


def _system(config: dict) -> systems.System:
    try:
        return systems.system_from_dict(_require(config, "system"))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config field 'system' invalid: {exc}")


def _observable(config: dict) -> core.Observable:
    try:
        return core.observable_from_dict(_require(config, "observable"))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config field 'observable' invalid: {exc}")


def _delay_count(config: dict) -> int:
    d = int(_require(config, "d"))
    m = config.get("m")
    return int(m) if m is not None else delay.delay_count_for(d)


def _seed(config: dict, override) -> int:
    if override is not None:
        return int(override)
    if "seed" not in config:
        raise ConfigError("config field 'seed' is missing (all runs are seeded)")
    return int(config["seed"])


def _trajectory(config: dict, sys_: systems.System) -> systems.Trajectory:
    tr = _require(config, "trajectory")
    x0 = np.asarray(_require(tr, "x0"), dtype=float)
    n = int(_require(tr, "n"))
    transient = int(tr.get("transient", 0))
    traj = systems.iterate(sys_, x0, n + transient)
    if transient:
        traj = systems.Trajectory(states=traj.states[transient:],
                                  system_id=traj.system_id)
    return traj


def write_states_csv(path, states: np.ndarray) -> None:
    header = ",".join(f"s{j}" for j in range(states.shape[1]))
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in states:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def write_json(path, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _pairs(config: dict, sys_: systems.System, samples: np.ndarray,
           seed: int) -> genericity.PairSet:
    pc = _require(config, "pairs")
    delta = float(_require(pc, "delta"))
    count = int(_require(pc, "count"))
    periodic = None
    if pc.get("detect_periodic", False):
        periodic = systems.find_periodic(
            sys_, n_max=int(pc.get("period_max", 4)),
            tol=float(pc.get("period_tol", 1e-9)),
            seeds=topology.grid_seeds(sys_, int(pc.get("period_seeds", 100))))
    default_gap = 2 * int(config["d"]) + 1 if "d" in config else 0
    return genericity.sample_pairs(samples, delta, count, sys=sys_,
                                   periodic_points=periodic,
                                   seed=int(pc.get("seed", seed)),
                                   min_index_gap=int(pc.get("min_index_gap",
                                                            default_gap)))


# --- subcommands ----------------------------------------------------------

def cmd_simulate(config, out: Path, seed, quiet, import_path=None) -> int:
    sys_ = _system(config)
    if import_path is not None:
        try:
            states = np.loadtxt(import_path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot import trajectory CSV: {exc}")
        if not np.all(np.isfinite(states)):
            raise ConfigError("imported trajectory contains non-finite values")
        traj = systems.Trajectory(states=states, system_id=sys_.system_id)
    else:
        traj = _trajectory(config, sys_)
    write_states_csv(out / "trajectory.csv", traj.states)
    if not quiet:
        print(f"simulate: wrote {len(traj)} states of {traj.system_id}")
    return EXIT_OK


def cmd_embed(config, out: Path, seed, quiet) -> int:
    sys_ = _system(config)
    h = _observable(config)
    m = _delay_count(config)
    traj = _trajectory(config, sys_)
    mat = delay.delay_matrix(h, traj, m)
    delay.write_delay_csv(out / "delays.csv", mat)
    if not quiet:
        print(f"embed: wrote {mat.shape[0]} delay vectors with m={m}")
    return EXIT_OK


def cmd_margin(config, out: Path, seed, quiet) -> int:
    sys_ = _system(config)
    h = _observable(config)
    m = _delay_count(config)
    traj = _trajectory(config, sys_)
    K = _pairs(config, sys_, traj.states, seed)
    K.write_csv(out / "pairs.csv")
    report = genericity.compatibility_margin(h, sys_, K, m)
    write_json(out / "margin.json", report.to_dict())
    if not quiet:
        print(f"margin: {report.margin:.6g} over {len(K)} pairs (m={m})")
    return EXIT_OK


def cmd_perturb(config, out: Path, seed, quiet) -> int:
    sys_ = _system(config)
    h = _observable(config)
    d = int(_require(config, "d"))
    eps = float(_require(config, "epsilon"))
    traj = _trajectory(config, sys_)
    K = _pairs(config, sys_, traj.states, seed)
    K.write_csv(out / "pairs.csv")
    try:
        f = genericity.perturb_to_compatible(h, eps, K, sys_, d, seed=seed)
    except genericity.PerturbationError as exc:
        write_json(out / "perturb_report.json", {"ok": False, "reason": str(exc)})
        if not quiet:
            print(f"perturb: failed: {exc}")
        return EXIT_HYPOTHESIS
    m = delay.delay_count_for(d)
    report = genericity.compatibility_margin(f, sys_, K, m)
    dist = core.sup_distance(f, h, traj.states)
    write_json(out / "perturbed_observable.json", core.observable_to_dict(f))
    write_json(out / "perturb_report.json", {
        "ok": True, "margin": report.margin, "sup_distance": dist,
        "epsilon": eps, "m": m,
    })
    out_config = dict(config)
    out_config["observable"] = core.observable_to_dict(f)
    write_json(out / "config_out.json", out_config)
    if not quiet:
        print(f"perturb: margin {report.margin:.6g}, sup-distance {dist:.6g}")
    return EXIT_OK


def cmd_dimension(config, out: Path, seed, quiet) -> int:
    sys_ = _system(config)
    traj = _trajectory(config, sys_)
    scales = [float(s) for s in _require(config, "scales")]
    box = topology.box_counting(traj.states, scales)
    cov_scales = [float(s) for s in config.get("covering_scales", scales[:2])]
    cov = topology.covering_dimension_estimate(traj.states, cov_scales)
    write_json(out / "dimension.json", {"box": box.to_dict(),
                                        "covering": cov.to_dict()})
    if not quiet:
        print(f"dimension: box {box.value:.3f}, covering {cov.value}")
    return EXIT_OK


def cmd_hypothesis(config, out: Path, seed, quiet) -> int:
    sys_ = _system(config)
    d = int(_require(config, "d"))
    report = topology.hypothesis_check(
        sys_, d, n_seeds=int(config.get("n_seeds", 400)),
        tol=float(config.get("tol", 1e-9)))
    write_json(out / "hypothesis.json", report.to_dict())
    if not quiet:
        for entry in report.per_n:
            mark = "ok" if entry["ok"] else "FAIL"
            print(f"hypothesis n={entry['n']}: dim {entry['detected_dim']} "
                  f"vs bound {entry['bound']} [{mark}]")
    return EXIT_OK if report.ok else EXIT_HYPOTHESIS


def cmd_yorke(config, out: Path, seed, quiet) -> int:
    sys_ = _system(config)
    if not isinstance(sys_, systems.SampledFlow):
        raise ConfigError("config field 'system' must be a sampled flow for yorke")
    d = int(_require(config, "d"))
    seeds = topology.grid_seeds(sys_, int(config.get("n_seeds", 1000)))
    cert = systems.yorke_certificate(sys_, d, equilibrium_seeds=seeds)
    hits = systems.periodic_return_scan(sys_, 2 * d,
                                        float(config.get("tol", 1e-6)), seeds)
    cert["scan_hits"] = [[list(map(float, x)), int(p)] for x, p in hits]
    write_json(out / "yorke.json", cert)
    if not quiet:
        print(f"yorke: threshold {cert['threshold']:.6g}, step {cert['step']}, "
              f"certified={cert['certified']}, scan hits {len(hits)}")
    return EXIT_OK if cert["certified"] and not hits else EXIT_HYPOTHESIS


def cmd_genericity(config, out: Path, seed, quiet) -> int:
    sys_ = _system(config)
    h = _observable(config)
    m = _delay_count(config)
    traj = _trajectory(config, sys_)
    K = _pairs(config, sys_, traj.states, seed)
    trials = int(_require(config, "trials"))
    bump_scale = float(_require(config, "bump_scale"))
    frac = genericity.genericity_monte_carlo(sys_, K, m, trials, bump_scale,
                                             seed=seed, base=h)
    write_json(out / "genericity.json", {
        "fraction": frac, "trials": trials, "bump_scale": bump_scale, "m": m,
    })
    if not quiet:
        print(f"genericity: compatible fraction {frac:.3f} over {trials} trials")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "embed": cmd_embed,
    "margin": cmd_margin,
    "perturb": cmd_perturb,
    "dimension": cmd_dimension,
    "hypothesis": cmd_hypothesis,
    "yorke": cmd_yorke,
    "genericity": cmd_genericity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delayrecon",
        description="Delay-coordinate reconstruction experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=".")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--quiet", action="store_true")
        if name == "simulate":
            sp.add_argument("--import", dest="import_path", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        seed = _seed(config, args.seed)
        kwargs = {}
        if args.command == "simulate":
            kwargs["import_path"] = args.import_path
        return COMMANDS[args.command](config, out, seed, args.quiet, **kwargs)
    except (ConfigError, ValueError, systems.DomainError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
