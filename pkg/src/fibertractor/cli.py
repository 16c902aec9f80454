"""Command-line front end.

Every subcommand reads an optional JSON config, applies ``--set key=value``
overrides (dotted paths, values parsed as JSON when possible), validates
the result and writes a table as CSV (``#``-prefixed header echoing the
resolved config) or JSON.
"""
from __future__ import annotations

import argparse
import copy
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .chain import ChainConfig, Injection, solve_chain
from .equilibria import (
    binding_cutoff,
    binding_distance_curve,
    find_equilibria,
    scan_stability_region,
)
from .exceptions import ConvergenceError, DomainError, SingularTransferError, TwoModeModelInvalid
from .force import chain_forces, closed_form_2p, closed_form_4p, to_newtons
from .paraxial import (
    BeadSpec,
    WaveguideSpec,
    distorted_mode,
    estimate_coupling,
    guided_modes,
    reflected_mode,
    to_scatter_params,
)
from .scatter import ModePair, SimpleFourPortParams

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_COMMON = {
    "modes": {"k1": 1.0, "k2": 0.9, "n_medium": 1.0},
    "injection": {"A1": 0.0, "A2": 1.0, "D1": 0.0, "D2": 0.0},
}

DEFAULTS = {
    "force-single": {
        **_COMMON,
        "model": "two_port",
        "k2_values": [0.7, 0.8, 0.9],
        "phi": 0.0,
        "t12": 0.8,
        "sweep": {"start": 0.0, "stop": 1.0, "num": 101},
        "units": None,
    },
    "force-chain": {
        **_COMMON,
        "bead": {"t": None, "t12": 0.54, "r12": 0.12, "phi": 0.0},
        "n_beads": 2,
        "d": {"start": 0.05, "stop": 125.66370614359172, "num": 2001},
        "units": None,
    },
    "equilibria": {
        **_COMMON,
        "bead": {"t": None, "t12": 0.54, "r12": 0.12, "phi": 0.0},
        "d_range": None,
        "samples": None,
    },
    "binding-curve": {
        **_COMMON,
        "k2_values": [0.7, 0.8, 0.9],
        "t": {"start": 0.7, "stop": 0.99, "num": 30},
        "d_range": None,
        "samples": None,
        "cutoff": False,
    },
    "stability-map": {
        **_COMMON,
        "t12": {"start": 0.0, "stop": 1.0, "num": 100},
        "r12": {"start": 0.0, "stop": 1.0, "num": 100},
        "d_range": None,
        "samples": None,
    },
    "estimate-coupling": {
        "waveguide": {"a": 9.0, "n0": 1.0, "wavelength": 1.0,
                      "mode_orders": [[m, 1] for m in range(1, 8)]},
        "bead": {"index": 1.5, "center": None},
        "diameters": {"start": 0.0, "stop": 6.0, "num": 61},
        "table": "coefficients",
        "pair": [[1, 1], [3, 1]],
        "renormalize": False,
        "resolution": [96, 192],
        "profile": {"order": [3, 1], "points": 501},
    },
}


class ConfigError(ValueError):
    pass


# -- config handling ---------------------------------------------------------

def _merge(defaults, user, path=""):
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        where = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"{where}: unknown setting")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, where + ".")
        else:
            out[key] = value
    return out


def _apply_override(cfg, assignment):
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def resolve_config(command, config_path=None, overrides=()):
    user = {}
    if config_path:
        try:
            with open(config_path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
    for ov in overrides:
        _apply_override(user, ov)
    return _merge(DEFAULTS[command], user)


class _Field:
    """Context manager that names the offending config field on failure."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None and issubclass(exc_type, (ValueError, TypeError, KeyError)) \
                and not issubclass(exc_type, ConfigError):
            raise ConfigError(f"{self.name}: {exc}") from exc
        return False


def _complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def _modes(cfg, k2=None):
    with _Field("modes"):
        m = cfg["modes"]
        return ModePair(float(m["k1"]), float(m["k2"] if k2 is None else k2), float(m["n_medium"]))


def _injection(cfg):
    with _Field("injection"):
        return Injection(*(_complex(cfg["injection"][k]) for k in ("A1", "A2", "D1", "D2")))


def _bead(cfg, name="bead"):
    with _Field(name):
        b = cfg[name]
        if b.get("t") is not None:
            return SimpleFourPortParams.from_transmission(float(b["t"]), float(b.get("phi", 0.0)))
        return SimpleFourPortParams(float(b["t12"]), float(b.get("r12", 0.0)), float(b.get("phi", 0.0)))


def _grid(cfg, name):
    with _Field(name):
        g = cfg[name]
        if isinstance(g, list):
            return np.asarray(g, dtype=float)
        num = int(g["num"])
        if num < 1:
            raise ValueError("num must be positive")
        return np.linspace(float(g["start"]), float(g["stop"]), num)


def _d_range(cfg):
    with _Field("d_range"):
        r = cfg["d_range"]
        return None if r is None else (float(r[0]), float(r[1]))


def _samples(cfg):
    with _Field("samples"):
        return None if cfg["samples"] is None else int(cfg["samples"])


def _units(cfg):
    u = cfg.get("units")
    if u is None:
        return None
    with _Field("units"):
        return float(u["power_w"]), float(u["n_eff"])


# -- subcommands -------------------------------------------------------------

def cmd_force_single(cfg, threads=1):
    inj = _injection(cfg)
    k2_values = cfg["k2_values"] or [cfg["modes"]["k2"]]
    sweep = _grid(cfg, "sweep")
    model = cfg["model"]
    if model not in ("two_port", "four_port"):
        raise ConfigError(f"model: expected 'two_port' or 'four_port', got {model!r}")
    units = _units(cfg)
    cols = ["k2", "t", "t12", "r12", "force"] + (["force_N"] if units else [])
    rows = []
    for k2 in k2_values:
        modes = _modes(cfg, k2)
        for x in sweep:
            with _Field("sweep"):
                if model == "two_port":
                    p = SimpleFourPortParams.from_transmission(float(x), float(cfg["phi"]))
                    f = closed_form_2p(float(x), float(cfg["phi"]), inj.A1, inj.A2, modes)
                else:
                    p = SimpleFourPortParams(float(cfg["t12"]), float(x), float(cfg["phi"]))
                    f = closed_form_4p(p, inj.A1, inj.A2, modes)
            f /= inj.power
            row = [modes.k2, p.t, p.t12, p.r12, f]
            if units:
                row.append(to_newtons(f, *units))
            rows.append(row)
    return cols, rows


def cmd_force_chain(cfg, threads=1):
    modes, inj, bead = _modes(cfg), _injection(cfg), _bead(cfg)
    n = int(cfg["n_beads"])
    if n < 1:
        raise ConfigError("n_beads: must be at least 1")
    d_values = _grid(cfg, "d")
    if (d_values < 0).any():
        raise ConfigError("d: distances must be non-negative")
    units = _units(cfg)
    cols = ["d"] + [f"F{j + 1}" for j in range(n)] + ["total", "flux_balance"]
    if units:
        cols += [f"F{j + 1}_N" for j in range(n)]
    rows = []
    for d in d_values:
        try:
            res = chain_forces(solve_chain(ChainConfig.identical(bead, n, float(d), modes), inj))
        except SingularTransferError as exc:
            raise SingularTransferError(f"at d={d:.17g}: {exc}", exc.condition_number) from exc
        row = [float(d), *res.forces, res.total, res.total_flux_balance]
        if units:
            row += [to_newtons(f, *units) for f in res.forces]
        rows.append(row)
    return cols, rows


def cmd_equilibria(cfg, threads=1):
    modes, inj, bead = _modes(cfg), _injection(cfg), _bead(cfg)
    with _Field("d_range"):
        eq = find_equilibria(bead, modes, inj, _d_range(cfg), _samples(cfg))
    cols = ["d_star", "F_common", "stable", "dF1", "dF2"]
    return cols, [[e.d_star, e.F_common, e.stable, e.dF1, e.dF2] for e in eq]


def cmd_binding_curve(cfg, threads=1):
    inj = _injection(cfg)
    t_values = _grid(cfg, "t")
    cols = ["k2", "t", "n_stable", "d_star"]
    rows = []
    for k2 in cfg["k2_values"] or [cfg["modes"]["k2"]]:
        modes = _modes(cfg, k2)
        with _Field("t"):
            curve = binding_distance_curve(t_values, modes, inj, _d_range(cfg), _samples(cfg))
        for t, ds in curve:
            if ds.size == 0:
                rows.append([modes.k2, t, 0, math.nan])
            for d in ds:
                rows.append([modes.k2, t, int(ds.size), float(d)])
        if cfg["cutoff"]:
            tc = binding_cutoff(modes, inj, d_range=_d_range(cfg), samples=_samples(cfg))
            rows.append([modes.k2, tc, -1, math.nan])
    return cols, rows


def cmd_stability_map(cfg, threads=1):
    modes, inj = _modes(cfg), _injection(cfg)
    t12, r12 = _grid(cfg, "t12"), _grid(cfg, "r12")
    with _Field("t12/r12"):
        smap = scan_stability_region(t12, r12, modes, inj, _d_range(cfg), _samples(cfg), n_jobs=threads)
    cols = ["r12", "t12", "status", "min_force", "zero_contour_t12"]
    rows = []
    for i, r in enumerate(smap.r12):
        for j, t in enumerate(smap.t12):
            a = smap.min_force[i, j]
            crossing = math.nan
            if j + 1 < len(smap.t12):
                b = smap.min_force[i, j + 1]
                if np.isfinite(a) and np.isfinite(b) and (a < 0) != (b < 0):
                    crossing = float(t + a / (a - b) * (smap.t12[j + 1] - t))
            rows.append([float(r), float(t), int(smap.status[i, j]), float(a), crossing])
    return cols, rows


def _order_label(o):
    return f"{o[0]}-{o[1]}"


def cmd_estimate_coupling(cfg, threads=1):
    with _Field("waveguide"):
        w = cfg["waveguide"]
        spec = WaveguideSpec(float(w["a"]), float(w["n0"]), float(w["wavelength"]),
                             tuple(tuple(o) for o in w["mode_orders"]))
        modes = guided_modes(spec)
    diameters = _grid(cfg, "diameters")
    with _Field("bead"):
        index = float(cfg["bead"]["index"])
        center = cfg["bead"]["center"]
        center = None if center is None else (float(center[0]), float(center[1]))
    with _Field("resolution"):
        resolution = tuple(int(v) for v in cfg["resolution"])
        if len(resolution) != 2 or min(resolution) < 2:
            raise ValueError("expected two positive node counts")
    pair = tuple(tuple(o) for o in cfg["pair"])
    table = cfg["table"]

    def bead_at(d):
        with _Field("diameters"):
            b = BeadSpec(float(d) / 2, index, center)
            b.check_inside(spec)
            return b

    if table == "profile":
        b = bead_at(diameters[0])
        with _Field("profile"):
            order = tuple(cfg["profile"]["order"])
            x = np.linspace(0.0, spec.a, int(cfg["profile"]["points"]))
        y = np.full_like(x, bead_at(diameters[0]).center_in(spec)[1])
        orig = distorted_mode(BeadSpec(0.0, index, center), spec, order, x, y).real
        dist = distorted_mode(b, spec, order, x, y)
        refl = reflected_mode(b, spec, order, x, y)
        cols = ["x", "original", "distorted_re", "distorted_im", "reflected_re", "reflected_im"]
        return cols, [list(r) for r in zip(x, orig, dist.real, dist.imag, refl.real, refl.imag)]

    if table == "coefficients":
        cols = ["diameter", "kind", "m", "n", "re", "im", "abs"]
        rows = []
        for d in diameters:
            with _Field("pair"):
                est = estimate_coupling(bead_at(d), spec, pair, resolution)
            for kind, mat in (("t", est.t_matrix), ("r", est.r_matrix)):
                for i, m in enumerate(modes.orders):
                    for j, n in enumerate(modes.orders):
                        c = mat[i, j]
                        rows.append([float(d), kind, _order_label(m), _order_label(n), c.real, c.imag, abs(c)])
        return cols, rows

    if table == "derived":
        cols = ["diameter", "t", "t12", "r12", "phi", "loss", "renormalized", "k2_over_k1",
                "force_A2", "status"]
        i1, i2 = modes.index(pair[0]), modes.index(pair[1])
        k_ratio = modes.beta[i2] / modes.beta[i1]
        two = ModePair(1.0, k_ratio)
        rows = []
        for d in diameters:
            with _Field("pair"):
                est = estimate_coupling(bead_at(d), spec, pair, resolution)
            try:
                res = to_scatter_params(est, renormalize=bool(cfg["renormalize"]))
            except TwoModeModelInvalid as exc:
                rows.append([float(d)] + [math.nan] * 5 + [bool(cfg["renormalize"]), k_ratio,
                                                            math.nan, f"refused: {exc}"])
                continue
            state = solve_chain(ChainConfig((res.scatter_matrix(),), (), two), Injection(0, 1))
            f = chain_forces(state).forces[0]
            p = res.params
            rows.append([float(d), res.t, p.t12, p.r12, p.phi, res.loss_fraction, res.renormalized,
                         k_ratio, f, "ok"])
        return cols, rows

    raise ConfigError(f"table: expected 'coefficients', 'derived' or 'profile', got {table!r}")


COMMANDS = {
    "force-single": cmd_force_single,
    "force-chain": cmd_force_chain,
    "equilibria": cmd_equilibria,
    "binding-curve": cmd_binding_curve,
    "stability-map": cmd_stability_map,
    "estimate-coupling": cmd_estimate_coupling,
}


# -- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else format(float(v), ".17g")
    s = str(v)
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) else float(v)
    return v


def render(command, cfg, cols, rows, fmt="csv") -> str:
    if fmt == "json":
        doc = {
            "command": command,
            "version": __version__,
            "config": cfg,
            "columns": cols,
            "rows": [[_json_value(v) for v in r] for r in rows],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# fibertractor {__version__} {command}\n")
    buf.write(f"# config: {json.dumps(cfg, sort_keys=True, separators=(',', ':'))}\n")
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _threads(arg):
    if arg is None:
        env = os.environ.get("FT_THREADS")
        try:
            arg = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"FT_THREADS: not an integer: {env!r}")
    if arg < 0:
        raise ConfigError("--threads: must be >= 0")
    return arg if arg > 0 else (os.cpu_count() or 1)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fibertractor",
        description="Optical forces on beads coupled to a two-mode waveguide.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, default=None, metavar="N",
                       help="worker processes, 0 = all cores (fallback: $FT_THREADS)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. --set modes.k2=0.8")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args.config, args.overrides)
        threads = _threads(args.threads)
        cols, rows = COMMANDS[args.command](cfg, threads)
    except (ConfigError, DomainError, TwoModeModelInvalid) as exc:
        print(f"fibertractor: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularTransferError, ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"fibertractor: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render(args.command, cfg, cols, rows, args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
