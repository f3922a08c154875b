"""Named experiments: each reads explicit parameters and writes CSV tables.

Every runner has the signature ``runner(params, out_dir, ctx) -> list[Path]``
where ``ctx`` is a :class:`RunContext` collecting propagator statistics,
retained mixture masses and invariant checks for the manifest.
"""
from __future__ import annotations

import ast
import csv
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import entanglement as ent
from .lattice import CouplingMode, Lattice
from .largescale import COHERENCE_ROUTE, extrapolate_fidelity, resolve_slope
from .magnification import (GradeRaisingCircuit, gr_trajectory, magnify_gr, magnify_xy,
                            transient_metric, transient_order)
from .measurement import PhasePOVM, joint_pipeline, joint_pipeline_mixed
from .propagator import EvolveStats, PropagatorConfig
from .spectra import moments, spectrum_of, write_spectra_csv
from .states import mixed_polarized, polarized_state


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# parameter parsing

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg}


def eval_expr(text: str, names: dict | None = None) -> float:
    """Arithmetic on numbers, ``pi`` and the given names (e.g. ``2*pi*Nh``)."""
    env = {"pi": math.pi, **(names or {})}

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in env:
            return env[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"unsupported expression {text!r}")
    try:
        return float(ev(ast.parse(str(text).strip(), mode="eval")))
    except SyntaxError:
        raise ConfigError(f"cannot parse {text!r}") from None


def parse_dims(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(x) for x in text)
    parts = str(text).replace("x", ",").replace("[", "").replace("]", "").split(",")
    try:
        return tuple(int(p) for p in parts if p.strip())
    except ValueError:
        raise ConfigError(f"bad dims {text!r}") from None


def parse_dims_list(text) -> list:
    """Several lattices separated by ';', e.g. ``4x5;20``."""
    return [parse_dims(t) for t in str(text).split(";") if t.strip()]


def parse_grid(text, names=None) -> list:
    """Comma list, or ``start:stop:step`` with stop included."""
    text = str(text).strip()
    if ":" in text:
        a, b, s = (eval_expr(x, names) for x in text.split(":"))
        k = int(math.floor((b - a) / s + 1e-9))
        return [a + i * s for i in range(k + 1)]
    return [eval_expr(x, names) for x in text.split(",") if x.strip()]


@dataclass
class Params:
    """Typed access to a flat parameter dict; every read must be explicit."""
    raw: dict
    experiment: str = ""

    def _get(self, key):
        if key not in self.raw or self.raw[key] in (None, ""):
            raise ConfigError(f"{self.experiment}: missing required parameter '{key}'")
        return self.raw[key]

    def has(self, key) -> bool:
        return self.raw.get(key) not in (None, "")

    def str(self, key) -> str:
        return str(self._get(key))

    def int(self, key) -> int:
        return int(eval_expr(self._get(key)))

    def float(self, key, **names) -> float:
        return eval_expr(self._get(key), names)

    def dims(self, key="dims") -> tuple:
        return parse_dims(self._get(key))

    def dims_list(self, key="dims") -> list:
        return parse_dims_list(self._get(key))

    def grid(self, key, **names) -> list:
        return parse_grid(self._get(key), names)

    def coupling(self) -> CouplingMode:
        return CouplingMode.parse(self._get("coupling"))

    def lattice(self, key="dims") -> Lattice:
        return Lattice(self.dims(key), 1.0, self.coupling())


@dataclass
class RunContext:
    cfg: PropagatorConfig = field(default_factory=PropagatorConfig)
    threads: int = 1
    stats: EvolveStats = field(default_factory=EvolveStats)
    kept_mass: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def check(self, name: str, ok: bool) -> None:
        self.checks[name] = bool(self.checks.get(name, True) and ok)


def _write_rows(path: Path, rows: list[dict], meta: dict | None = None) -> Path:
    if not rows:
        raise ConfigError(f"nothing to write to {path}")
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})
    return path


def _outcome_ok(out) -> bool:
    rho = out.rho_q
    lam = np.linalg.eigvalsh(rho)
    return (abs(np.trace(rho).real - 1) < 1e-9 and lam.min() > -1e-9
            and out.c_0110 <= out.c_0101 + 1e-12)


def _lat_label(lat: Lattice) -> str:
    return lat.label()


# --------------------------------------------------------------------------
# magnification

def spectra_gr(p: Params, out: Path, ctx: RunContext):
    lat = p.lattice()
    t = p.float("t", Nh=lat.n_spins)
    res = magnify_gr(lat, t, cfg=ctx.cfg)
    ctx.stats.merge(res.stats)
    b = res.branch
    ctx.check("norm", abs(np.linalg.norm(b.psi1) - 1) < 1e-9)
    ctx.check("branch0_identity", np.array_equal(b.psi0, polarized_state(lat.n_spins)))
    meta = {"protocol": "gr", "lattice": _lat_label(lat), "t": t}
    return [write_spectra(out / "spectra_gr.csv", b, meta)]


def write_spectra(path, branch, meta):
    write_spectra_csv(path, {"P_psi0": spectrum_of(branch.psi0), "P_psi1": spectrum_of(branch.psi1)},
                      meta)
    return Path(path)


def spectra_xy(p: Params, out: Path, ctx: RunContext):
    lat = p.lattice()
    dt = p.float("dt", Nh=lat.n_spins)
    r = p.int("r")
    res = magnify_xy(lat, dt, r, cfg=ctx.cfg, record=True)
    ctx.stats.merge(res.stats)
    b = res.branch
    ctx.check("norm", abs(np.linalg.norm(b.psi1) - 1) < 1e-9)
    meta = {"protocol": "xy", "lattice": _lat_label(lat), "dt": dt, "r": r}
    tr = res.transcript
    rows = [{"round": i, "mean": float(m), "sd": float(s)}
            for i, (m, s) in enumerate(zip(tr.means, tr.sds))]
    return [write_spectra(out / "spectra_xy.csv", b, meta),
            _write_rows(out / "moments_xy.csv", rows, meta)]


def moments_vs_time(p: Params, out: Path, ctx: RunContext):
    coupling = p.coupling()
    t_max, n_points = p.float("t_max"), p.int("n_points")
    stop = p.has("stop_at_transient") and p.str("stop_at_transient").lower() in ("1", "true", "yes")
    rows, summary = [], []
    for dims in p.dims_list():
        lat = Lattice(dims, 1.0, coupling)
        tr = gr_trajectory(lat, t_max, n_points, cfg=ctx.cfg,
                           stop_below=lat.n_spins / 4 if stop else None, stats=ctx.stats)
        for t, m, s in zip(tr.times, tr.means, tr.sds):
            rows.append({"lattice": _lat_label(lat), "t": float(t), "mean": float(m), "sd": float(s)})
        summary.append({"lattice": _lat_label(lat), "n_spins": lat.n_spins,
                        "transient_time": transient_metric(tr)})
    meta = {"protocol": "gr", "t_max": t_max, "n_points": n_points}
    return [_write_rows(out / "moments_vs_time.csv", rows, meta),
            _write_rows(out / "transients.csv", summary, meta)]


def _compare(first: Lattice, second: Lattice, p: Params, out: Path, ctx: RunContext, name: str):
    t_max, n_points = p.float("t_max"), p.int("n_points")
    t1, t2 = transient_order(first, second, t_max, n_points, ctx.cfg, ctx.stats)
    ctx.check(f"{name}_ordering", t1 < t2)
    rows = [{"lattice": _lat_label(first), "transient_time": t1, "sampled_until": t1},
            {"lattice": _lat_label(second), "transient_time": t2,
             "sampled_until": t1 if math.isinf(t2) else t2}]
    meta = {"t_max": t_max, "n_points": n_points}
    return [_write_rows(out / f"{name}.csv", rows, meta)]


def dim_compare(p: Params, out: Path, ctx: RunContext):
    c = p.coupling()
    return _compare(Lattice(p.dims("dims_a"), 1.0, c), Lattice(p.dims("dims_b"), 1.0, c),
                    p, out, ctx, "dim_compare")


def nn_compare(p: Params, out: Path, ctx: RunContext):
    dims = p.dims()
    return _compare(Lattice(dims, 1.0, CouplingMode.DIPOLAR), Lattice(dims, 1.0, CouplingMode.NN),
                    p, out, ctx, "nn_compare")


# --------------------------------------------------------------------------
# fidelity

def fidelity_point(lat: Lattice, t: float, eps: float, theta_slope, ctx: RunContext) -> dict:
    n_total = 2 * lat.n_spins
    slope = resolve_slope(theta_slope, n_total, eps)
    povm = PhasePOVM.linear(n_total, slope)
    if eps == 0.0:
        res = magnify_gr(lat, t, cfg=ctx.cfg)
        ctx.stats.merge(res.stats)
        o = joint_pipeline(res.branch, res.branch, povm)
        kept = 1.0
    else:
        mix = mixed_polarized(lat.n_spins, eps)
        o = joint_pipeline_mixed(mix, mix, lat, t, povm, ctx.cfg, ctx.threads, ctx.stats)
        kept = mix.kept_mass
        ctx.kept_mass[f"{_lat_label(lat)}/eps={eps}"] = kept
    ctx.check("rho_q_valid", _outcome_ok(o))
    return {"N": n_total, "eps": eps, "p_select": o.p_select, "population": o.population,
            "coherence_rel": o.coherence_rel, "fidelity": o.fidelity, "kept_mass": kept}


def fidelity_curve(p: Params, out: Path, ctx: RunContext):
    """Exact points on 1D chains of N/2 spins up to ``exact_max``, model points for all N."""
    c = p.coupling()
    n_grid = [int(n) for n in p.grid("n_grid")]
    exact_max = p.int("exact_max")
    eps = p.float("eps")
    slope = p.str("theta_slope")
    rows = []
    for n in n_grid:
        if n <= exact_max:
            lat = Lattice((n // 2,), 1.0, c)
            r = fidelity_point(lat, p.float("t", Nh=n // 2), eps, slope, ctx)
            rows.append({"method": "exact", **r})
        e = extrapolate_fidelity(n, eps, slope)
        rows.append({"method": "model", "N": n, "eps": eps, "p_select": e.p_select,
                     "population": e.population, "coherence_rel": e.coherence_rel,
                     "fidelity": e.fidelity, "kept_mass": 1.0})
    model = [r["fidelity"] for r in rows if r["method"] == "model"]
    ctx.check("model_fidelity_nondecreasing", all(b >= a - 1e-12 for a, b in zip(model, model[1:])))
    ctx.notes["coherence_route"] = COHERENCE_ROUTE
    return [_write_rows(out / "fidelity_curve.csv", rows, {"coherence": COHERENCE_ROUTE.replace(" ", "_")})]


def mixed_fidelity(p: Params, out: Path, ctx: RunContext):
    lat_list = [Lattice(d, 1.0, p.coupling()) for d in p.dims_list()]
    rows = []
    for lat in lat_list:
        t = p.float("t", Nh=lat.n_spins)
        for eps in p.grid("eps_grid"):
            rows.append(fidelity_point(lat, t, eps, p.str("theta_slope"), ctx))
    return [_write_rows(out / "mixed_fidelity.csv", rows)]


def negativity_point(lat: Lattice, t: float, eps: float, ctx: RunContext) -> dict:
    circ = GradeRaisingCircuit(lat, t, ctx.cfg)
    mix = mixed_polarized(lat.n_spins, eps)
    rho = ent.micro_macro_density(mix, circ.u1, lat.n_spins)
    ctx.stats.merge(circ.stats)
    neg = ent.negativity(rho, [lat.n_spins])
    lneg = ent.log_negativity(rho, [lat.n_spins])
    ctx.kept_mass[f"{_lat_label(lat)}/eps={eps}"] = mix.kept_mass
    ctx.check("lneg_identity", abs(lneg - math.log2(2 * neg + 1)) < 1e-12)
    return {"N_h": lat.n_spins, "eps": eps, "negativity": neg, "log_negativity": lneg,
            "kept_mass": mix.kept_mass}


def negativity_sweep(p: Params, out: Path, ctx: RunContext):
    rows = []
    for dims in p.dims_list():
        lat = Lattice(dims, 1.0, p.coupling())
        t = p.float("t", Nh=lat.n_spins)
        for eps in p.grid("eps_grid"):
            rows.append(negativity_point(lat, t, eps, ctx))
    return [_write_rows(out / "negativity_sweep.csv", rows)]


def loss_ep(p: Params, out: Path, ctx: RunContext):
    lat = p.lattice()
    rows = []
    for t in p.grid("t_grid", Nh=lat.n_spins):
        res = magnify_gr(lat, t, cfg=ctx.cfg)
        ctx.stats.merge(res.stats)
        b = res.branch
        bound = ent.loss_fidelity_bound(b, b)
        rows.append({"t": t, "mean_spectrum": moments(spectrum_of(b.psi1))[0],
                     "e_p_avg": ent.mean_loss_entropy(b),
                     "fidelity_bound": bound.mean, "fidelity_bound_linear": bound.linear_form})
    return [_write_rows(out / "loss_ep.csv", rows, {"lattice": _lat_label(lat)})]


def extrapolate(p: Params, out: Path, ctx: RunContext):
    rows = []
    for n in p.grid("n_grid"):
        for eps in p.grid("eps_grid"):
            rows.append(extrapolate_fidelity(int(n), eps, p.str("theta_slope")).row())
    ctx.notes["coherence_route"] = COHERENCE_ROUTE
    return [_write_rows(out / "extrapolate.csv", rows)]


EXPERIMENTS = {
    "spectra_xy": spectra_xy,
    "spectra_gr": spectra_gr,
    "moments_vs_time": moments_vs_time,
    "dim_compare": dim_compare,
    "nn_compare": nn_compare,
    "fidelity_curve": fidelity_curve,
    "negativity_sweep": negativity_sweep,
    "mixed_fidelity": mixed_fidelity,
    "loss_ep": loss_ep,
    "extrapolate": extrapolate,
}
