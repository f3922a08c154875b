"""Command line entry point.

    mesospin [--threads N] [--out-dir DIR] <command> ...

``run CONFIG`` executes one named experiment from a flat ``key = value``
file (``--set key=value`` overrides entries); the other commands are
shortcuts for single experiments. Each invocation writes its CSV files and a
JSON manifest; ``--figures`` additionally renders PNGs next to the CSVs.

Exit status: 0 when every invariant checked during the run held, 1 when
one failed, 2 for configuration errors, 3 when a computation raised.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .experiments import EXPERIMENTS, ConfigError, Params, RunContext
from .propagator import PropagatorConfig

log = logging.getLogger("mesospin")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    out_dir: Path = Path(".")
    seed: int = 0
    out_name: str | None = None       # rename of the primary output file

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        self.out_dir = Path(self.out_dir)


def read_config(path) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def apply_overrides(cfg: dict, pairs) -> dict:
    cfg = dict(cfg)
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        cfg[k.strip()] = v.strip()
    return cfg


def config_from_dict(d: dict, out_dir=None) -> ExperimentConfig:
    d = dict(d)
    if "experiment" not in d:
        raise ConfigError("config must name an experiment")
    exp = d.pop("experiment")
    seed = int(d.pop("seed", 0))
    cfg_out = d.pop("out_dir", None)
    return ExperimentConfig(exp, d, Path(out_dir or cfg_out or "."), seed)


def _propagator_config(params: dict) -> PropagatorConfig:
    kw = {}
    if params.get("krylov_dim"):
        kw["krylov_dim"] = int(params["krylov_dim"])
    if params.get("tol"):
        kw["tol"] = float(params["tol"])
    return PropagatorConfig(**kw)


def run(config: ExperimentConfig, threads: int = 1, figures: bool = False) -> dict:
    """Execute one experiment and write its manifest; returns the manifest.

    On any error the files written so far are removed and the error is
    re-raised with the experiment name attached.
    """
    config.out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(cfg=_propagator_config(config.params), threads=max(1, int(threads)))
    params = Params({k: v for k, v in config.params.items() if k not in ("krylov_dim", "tol")},
                    config.experiment)
    t0 = time.perf_counter()
    written: list[Path] = []
    try:
        written = list(EXPERIMENTS[config.experiment](params, config.out_dir, ctx))
        if config.out_name:
            stem = Path(config.out_name).stem
            for i, f in enumerate(written):
                target = config.out_dir / (config.out_name if i == 0 else f"{stem}_{f.name}")
                os.replace(f, target)
                written[i] = target
        if figures:
            from .plotting import render
            written += render(config.experiment, written)
    except Exception as exc:
        for f in written:
            Path(f).unlink(missing_ok=True)
        for f in _expected_outputs(config):
            f.unlink(missing_ok=True)
        if isinstance(exc, ConfigError):
            raise
        raise RuntimeError(f"experiment {config.experiment} failed: {exc}") from exc
    manifest = {
        "package": "mesospin",
        "version": __version__,
        "experiment": config.experiment,
        "config": dict(config.params),
        "seed": config.seed,
        "propagator": {"krylov_dim": ctx.cfg.krylov_dim, "tol": ctx.cfg.tol},
        "runtime_s": round(time.perf_counter() - t0, 3),
        "outputs": [str(Path(f).name) for f in written],
        "kept_mass": ctx.kept_mass,
        "propagator_stats": {"substeps": ctx.stats.substeps, "matvecs": ctx.stats.matvecs,
                             "error_estimate": ctx.stats.error_estimate},
        "checks": ctx.checks,
        "notes": ctx.notes,
        "ok": all(ctx.checks.values()),
    }
    mpath = config.out_dir / f"{Path(written[0]).stem}.manifest.json"
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    manifest["manifest_path"] = str(mpath)
    log.info("%s finished in %.1f s", config.experiment, manifest["runtime_s"])
    return manifest


def _expected_outputs(config):
    # files an experiment may have created before failing
    stems = {"spectra_xy": ["spectra_xy", "moments_xy"], "moments_vs_time": ["moments_vs_time", "transients"]}
    return [config.out_dir / f"{s}.csv" for s in stems.get(config.experiment, [config.experiment])]


# --------------------------------------------------------------------------
# argparse

def _add_lattice(p, grid=False):
    p.add_argument("--dims", required=True,
                   help="half-MSS lattice, e.g. 12 or 4x5" + ("; several separated by ';'" if grid else ""))
    p.add_argument("--coupling", required=True, choices=["dipolar", "nn"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mesospin", description=__doc__.split("\n\n")[0],
                                 allow_abbrev=False)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for mixture terms")
    ap.add_argument("--out-dir", default=".", help="directory for all outputs")
    ap.add_argument("--krylov-dim", type=int, default=None)
    ap.add_argument("--tol", type=float, default=None, help="propagator local error tolerance")
    ap.add_argument("--figures", action="store_true", help="also render PNG figures from the CSVs")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("magnify", help="magnetization spectra of both branches")
    p.add_argument("--protocol", required=True, choices=["xy", "gr"])
    _add_lattice(p)
    p.add_argument("--t", help="GR evolution time (may use pi and Nh)")
    p.add_argument("--dt", help="XY step length")
    p.add_argument("--reps", help="XY number of rounds")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fidelity", help="post-selected two-qubit state of the full pipeline")
    _add_lattice(p)
    p.add_argument("--t", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--theta-slope", required=True, help="'auto' or a number")
    p.add_argument("--out", required=True)

    p = sub.add_parser("negativity-sweep", help="qubit-MSS log negativity against eps")
    _add_lattice(p, grid=True)
    p.add_argument("--t", required=True)
    p.add_argument("--eps-grid", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("loss-ep", help="entanglement of projection after one lost spin")
    _add_lattice(p)
    p.add_argument("--t-grid", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("extrapolate", help="binomial-model fidelity and populations")
    p.add_argument("--n-grid", required=True)
    p.add_argument("--eps-grid", required=True)
    p.add_argument("--theta-slope", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="run a named experiment from a config file")
    p.add_argument("config", help="key = value file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return ap


def config_from_args(args) -> ExperimentConfig:
    out_dir = Path(args.out_dir)
    if args.command == "run":
        d = apply_overrides(read_config(args.config), args.set)
        cfg = config_from_dict(d, out_dir if args.out_dir != "." else None)
    else:
        if args.command == "magnify":
            if args.protocol == "gr":
                exp, d = "spectra_gr", {"t": args.t}
            else:
                exp, d = "spectra_xy", {"dt": args.dt, "r": args.reps}
        elif args.command == "fidelity":
            exp, d = "mixed_fidelity", {"t": args.t, "eps_grid": args.eps,
                                        "theta_slope": args.theta_slope}
        elif args.command == "negativity-sweep":
            exp, d = "negativity_sweep", {"t": args.t, "eps_grid": args.eps_grid}
        elif args.command == "loss-ep":
            exp, d = "loss_ep", {"t_grid": args.t_grid}
        else:
            exp, d = "extrapolate", {"n_grid": args.n_grid, "eps_grid": args.eps_grid,
                                     "theta_slope": args.theta_slope}
        if hasattr(args, "dims"):
            d.update(dims=args.dims, coupling=args.coupling)
        cfg = ExperimentConfig(exp, d, out_dir, out_name=args.out)
    if args.krylov_dim:
        cfg.params["krylov_dim"] = args.krylov_dim
    if args.tol:
        cfg.params["tol"] = args.tol
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        manifest = run(cfg, threads=args.threads, figures=args.figures)
    except ConfigError as exc:
        print(f"mesospin: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"mesospin: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = [k for k, v in manifest["checks"].items() if not v]
    for f in manifest["outputs"]:
        print(cfg.out_dir / f)
    print(manifest["manifest_path"])
    if failed:
        print(f"mesospin: invariant checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
