"""Command-line entry point.

Subcommands: ``reflect``, ``fidelity``, ``sweep``, ``oracle`` and
``blockade``. Output goes to ``--out`` or stdout.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from ..dynamics import compare_with_closed_form
from ..errors import DarkGateError
from ..model import sample_ensemble
from ..reflection import (FrequencyGrid, blockade_radius, count_blockaded, n_blockaded_elongated,
                          reflection_full)
from . import config as cfgmod
from .records import spectrum_csv_text, write_json, write_sweep, write_text
from .sweep import SweepSpec, atom_budget, fit_scaling, minimize_over_omega, run_sweep

log = logging.getLogger("darkgate")


def _subset(text: str) -> frozenset:
    text = text.strip()
    if not text or text.lower() in ("none", "empty"):
        return frozenset()
    return frozenset(int(t) for t in text.split(","))


def _config(args) -> dict:
    if args.config:
        return cfgmod.load(args.config, preset=args.preset, seed=args.seed)
    return cfgmod.resolve(preset=args.preset, seed=args.seed)


def _ensemble(cfg, params, n_atoms=None):
    geom = cfgmod.geometry(cfg)
    if n_atoms is not None:
        geom = geom.replace(n_atoms=n_atoms)
    return sample_ensemble(geom, params)


def cmd_reflect(args, cfg) -> int:
    params = cfgmod.physics_params(cfg)
    real = _ensemble(cfg, params).with_excited(_subset(args.excited))
    half = cfg["photon"]["grid_half_width_mhz"]
    half = 6.0 * cfg["photon"]["bandwidth_mhz"] if half is None else float(half)
    grid = FrequencyGrid.symmetric(half, int(cfg["photon"]["grid_points"]))
    write_text(spectrum_csv_text(reflection_full(real, params, grid)), args.out)
    return 0


def cmd_fidelity(args, cfg) -> int:
    spec = SweepSpec.from_config(cfg)
    params = cfgmod.physics_params(cfg)
    nc = args.nc if args.nc is not None else cfg["geometry"]["n_atoms"] * params.cooperativity
    budget = atom_budget(spec, nc)
    if not budget.valid:
        raise DarkGateError(f"N C = {nc:g} is infeasible: {budget.reason}")
    spec = spec.replace(omega_values=(abs(params.omega_ctrl),), nc_values=(nc,))
    point = run_sweep(spec, threads=args.threads).points[0]
    write_json({
        "gate": spec.gate, "omega_mhz": point.omega, "nc": point.nc, "n_atoms": point.n_atoms,
        "fidelity_mean": point.fidelity_mean, "fidelity_std": point.fidelity_std,
        "fidelities": list(point.fidelities), "worst_realization": point.worst_realization,
        "best_realization": point.best_realization, "r_b_um": point.r_b, "n_b": point.n_b,
        "seed": spec.seed,
    }, args.out)
    return 0


def cmd_sweep(args, cfg) -> int:
    spec = SweepSpec.from_config(cfg)
    t0 = time.perf_counter()
    result = run_sweep(spec, threads=args.threads)
    if args.minimize:
        optima = []
        for nc in spec.nc_values:
            if not atom_budget(spec, nc).valid:
                continue
            opt = minimize_over_omega(spec, nc, threads=args.threads)
            optima.append({"nc": nc, "omega_mhz": opt.omega, "infidelity": opt.infidelity,
                           "at_boundary": opt.at_boundary})
        result.metadata["optima"] = optima
        pts = [(o["nc"], o["infidelity"]) for o in optima if o["infidelity"] > 0]
        if len(pts) >= 4:
            fit = fit_scaling(pts)
            result.metadata["scaling"] = fit._asdict()
    log.info("sweep of %d points took %.1f s", len(result.points), time.perf_counter() - t0)
    if args.out:
        side = write_sweep(result, args.out)
        log.info("wrote %s and %s", args.out, side)
    else:
        write_text(result.csv_text())
    return 0


def cmd_oracle(args, cfg) -> int:
    params = cfgmod.physics_params(cfg)
    real = _ensemble(cfg, params, n_atoms=args.n_atoms)
    d_omega = float(cfg["photon"]["bandwidth_mhz"])
    subsets = ([frozenset(), frozenset({0}), frozenset({1}), frozenset({0, 1})]
               if real.n_qubits >= 2 else [frozenset(), frozenset({0})])
    lines = ["excited,max_rel_error,steps,dt_us"]
    for s in subsets:
        cmp = compare_with_closed_form(real.with_excited(s), params, d_omega)
        label = "+".join(str(j) for j in sorted(s)) or "none"
        lines.append(f"{label},{cmp.max_rel_error!r},{cmp.steps},{cmp.dt!r}")
    write_text("\n".join(lines) + "\n", args.out)
    return 0


def cmd_blockade(args, cfg) -> int:
    params = cfgmod.physics_params(cfg)
    geom = cfgmod.geometry(cfg)
    real = sample_ensemble(geom, params)
    excited = frozenset(range(real.n_qubits))
    r_b = blockade_radius(params)
    write_json({
        "omega_mhz": abs(params.omega_ctrl), "r_b_um": r_b, "n_atoms": geom.n_atoms,
        "n_b_counted": count_blockaded(real.with_excited(excited), params),
        "n_b_elongated": n_blockaded_elongated(params, geom.n_atoms, geom),
        "seed": cfg["geometry"]["seed"],
    }, args.out)
    return 0


COMMANDS = {
    "reflect": (cmd_reflect, "emit the reflection spectrum R(w) of one sampled ensemble"),
    "fidelity": (cmd_fidelity, "gate fidelity at a single (Omega, N C) point"),
    "sweep": (cmd_sweep, "fidelity grid over (Omega, N C)"),
    "oracle": (cmd_oracle, "time-domain versus closed-form reflection report"),
    "blockade": (cmd_blockade, "blockade radius and number of blockaded atoms"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--preset", choices=cfgmod.PRESETS, help="named parameter set")
    common.add_argument("--seed", type=int, help="root random seed (overrides the config)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="darkgate", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    parsers = {name: sub.add_parser(name, parents=[common], help=text)
               for name, (_, text) in COMMANDS.items()}
    parsers["reflect"].add_argument("--excited", default="",
                                    help="comma-separated excited qubit indices (default: none)")
    parsers["fidelity"].add_argument("--nc", type=float, help="collective cooperativity (default: from n_atoms)")
    parsers["sweep"].add_argument("--minimize", action="store_true",
                                  help="also minimize the infidelity over Omega for each N C and fit the scaling")
    parsers["oracle"].add_argument("--n-atoms", type=int, default=20, help="ensemble size (default: 20)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = _config(args)
        return COMMANDS[args.command][0](args, cfg)
    except (DarkGateError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
