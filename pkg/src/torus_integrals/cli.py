"""Batch front end: ``torus-integrals <command> --config run.json --out DIR``.

Exit codes: 0 ok, 1 usage, 2 obstruction, 3 reality failure, 4 integration failure.
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cascade import build_liouville, run_cascade
from .flow_sim import (
    IntegrationControls,
    IntegrationError,
    SystemSpec,
    flat_cosine_integral,
    integrate,
    momentum_x,
    poly_observable,
)
from .fourier_field import (
    FourierField,
    TorusLattice,
    constant,
    field_from_json,
    field_to_json,
    lattice_from_json,
    make_field,
    random_metric,
)
from .magnetic import (
    ResidualError,
    dgrw_cubic,
    dgrw_trig,
    flat_constant_field,
    level_initial_states,
    linear_magnetic_system,
    multi_level_test,
)
from .momentum_poly import MetricError, RealityError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_OBSTRUCTION = 2
EXIT_REALITY = 3
EXIT_INTEGRATION = 4

MAGNETIC_PRESETS = ("dgrw-trig", "dgrw-cubic", "linear-magnetic", "flat-constant-B")
SYSTEM_PRESETS = ("flat", "liouville", "y-only", "random") + MAGNETIC_PRESETS


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: Path = Path("out")
    seed: int = 0
    rtol: float = 1e-10
    atol: float = 1e-10
    band: int | None = None
    T: float | None = None
    samples: int | None = None

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise UsageError("tolerances must be positive")
        if self.band is not None and self.band < 1:
            raise UsageError("--band must be at least 1")
        if self.samples is not None and self.samples < 2:
            raise UsageError("--samples must be at least 2")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        params = {}
        if args.config:
            try:
                params = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(params, dict):
                raise UsageError("config must be a JSON object")

        def pick(name, default):
            v = getattr(args, name, None)
            return v if v is not None else params.get(name, default)

        return cls(args.command, params, Path(pick("out", "out")), int(pick("seed", 0)),
                   float(pick("rtol", 1e-10)), float(pick("atol", 1e-10)), _opt(pick("band", None), int),
                   _opt(pick("T", None), float), _opt(pick("samples", None), int))

    @property
    def lattice(self) -> TorusLattice:
        d = dict(self.params.get("lattice", {}))
        if self.band is not None:
            d["N"] = int(self.band)
        return lattice_from_json(d)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def controls(self, samples: int = 1001) -> IntegrationControls:
        return IntegrationControls(rtol=self.rtol, atol=self.atol, samples=int(self.samples or samples))

    def header(self) -> dict:
        return {"command": self.command, "seed": self.seed, "rtol": self.rtol, "atol": self.atol,
                "lattice": self.lattice.to_json(), "params": self.params}


def _opt(v, cast):
    return None if v is None else cast(v)


# --- builders -------------------------------------------------------------------

def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    return complex(v)


def _cos(lattice: TorusLattice, amp: float, k: int = 0, l: int = 0) -> list:
    return [(k, l, amp / 2), (-k, -l, amp / 2)]


def liouville_profiles(p: dict, lattice: TorusLattice) -> tuple[FourierField, FourierField]:
    """``v = v0 + av cos(mx x)``, ``w = w0 + aw cos(my y)`` unless explicit fields are given."""
    if "v" in p and "w" in p:
        return field_from_json(p["v"], lattice), field_from_json(p["w"], lattice)
    mx, my = int(p.get("mx", 1)), int(p.get("my", 1))
    v = make_field(lattice, [(0, 0, float(p.get("v0", 1.5)))] + _cos(lattice, float(p.get("av", 1.0)), k=mx))
    w = make_field(lattice, [(0, 0, float(p.get("w0", 1.5)))] + _cos(lattice, float(p.get("aw", 1.0)), l=my))
    return v, w


def mixed_metric(eps: float, lattice: TorusLattice, base: float = 3.0) -> FourierField:
    """``base + cos x + cos y + eps sin x sin y``; the mixed derivative has sup norm ``eps``."""
    q = eps / 4
    modes = [(0, 0, base), (1, 0, 0.5), (-1, 0, 0.5), (0, 1, 0.5), (0, -1, 0.5),
             (1, 1, -q), (-1, -1, -q), (1, -1, q), (-1, 1, q)]
    return make_field(lattice, modes)


def build_metric(p: dict, lattice: TorusLattice, rng: np.random.Generator) -> FourierField:
    kind = p.get("kind", "liouville")
    if kind == "flat":
        return constant(float(p.get("value", 1.0)), lattice)
    if kind == "liouville":
        v, w = liouville_profiles(p, lattice)
        return (v + w).real
    if kind == "y-only":
        return make_field(lattice, [(0, 0, float(p.get("base", 2.0)))]
                          + _cos(lattice, float(p.get("amp", 1.0)), l=int(p.get("l", 1))))
    if kind == "mixed":
        return mixed_metric(float(p.get("eps", 0.1)), lattice, float(p.get("base", 3.0)))
    if kind == "random":
        band = int(p.get("band", 3))
        return random_metric(rng, lattice, band, float(p.get("amplitude", 0.5)), float(p.get("base", 1.0)))
    if kind == "field":
        return field_from_json(p["field"], lattice).real
    raise UsageError(f"unknown metric kind {kind!r}")


@dataclass
class BuiltSystem:
    spec: SystemSpec
    observables: dict  # name -> callable E -> observable
    info: dict = field(default_factory=dict)
    levels: tuple = (1.0,)


def build_system(p: dict, lattice: TorusLattice, rng: np.random.Generator) -> BuiltSystem:
    preset = p.get("preset", "flat")
    if preset not in SYSTEM_PRESETS:
        raise UsageError(f"unknown system preset {preset!r}; choose from {', '.join(SYSTEM_PRESETS)}")
    if preset == "flat":
        spec = SystemSpec(constant(1.0, lattice), name="flat")
        return BuiltSystem(spec, {"px": lambda E: momentum_x})
    if preset == "liouville":
        v, w = liouville_profiles(p, lattice)
        L = build_liouville(v, w)
        spec = SystemSpec(L.g, name="liouville")
        return BuiltSystem(spec, {"F2": lambda E: poly_observable(L.F2, E), "F2_closed": lambda E: L.closed_form})
    if preset == "y-only":
        g = build_metric({**p, "kind": "y-only"}, lattice, rng)
        return BuiltSystem(SystemSpec(g, name="y-only"), {"px": lambda E: momentum_x})
    if preset == "random":
        g = build_metric({**p, "kind": "random"}, lattice, rng)
        return BuiltSystem(SystemSpec(g, name="random"), {})
    if preset in ("dgrw-trig", "dgrw-cubic"):
        s = _build_dgrw(preset, p, lattice)
        return BuiltSystem(s.spec, {"F2": lambda E, F=s.F2: poly_observable(F)}, s.audit(), (s.E, 2 * s.E))
    if preset == "linear-magnetic":
        a0 = make_field(lattice, [(0, 0, float(p.get("c", 0.0)))] + _cos(lattice, float(p.get("amp", 1.0)), l=1))
        g = make_field(lattice, [(0, 0, float(p.get("g0", 1.0)))] + _cos(lattice, float(p.get("g1", 0.3)), l=1))
        c = linear_magnetic_system(a0, g)
        return BuiltSystem(c.spec, {"F1": lambda E, F=c.F: poly_observable(F)}, {}, (1.0, 4.0))
    B = float(p.get("B", 1.0))
    spec = flat_constant_field(B, lattice)
    return BuiltSystem(spec, {"cos": lambda E: flat_cosine_integral(B), "px": lambda E: momentum_x},
                       {"B": B}, (1.0, 2.0))


def _build_dgrw(preset: str, p: dict, lattice: TorusLattice):
    kw = {k: p[k] for k in ("E", "alpha0", "alpha1") if k in p}
    if preset == "dgrw-trig":
        kw.update({k: p[k] for k in ("mu", "nu", "a", "b") if k in p})
        return dgrw_trig(lattice=lattice, **kw)
    kw.update({k: p[k] for k in ("alpha3", "amp_v", "amp_w", "band") if k in p})
    if "lattice" not in p and lattice.N < 64:
        # the cubic profiles need headroom for g = f(v - w)
        lattice = TorusLattice(lattice.Lx, lattice.Ly, 64)
    return dgrw_cubic(lattice=lattice, **kw)


# --- output ---------------------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _write(out: Path, name: str, obj) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(obj if isinstance(obj, str) else _dump(obj))
    return path


# --- commands -------------------------------------------------------------------

def cmd_cascade(cfg: RunConfig) -> int:
    p = cfg.params
    lat = cfg.lattice
    g = build_metric(p.get("metric", {"kind": "liouville"}), lat, cfg.rng())
    k = int(p.get("k", 2))
    E = float(p.get("E", 1.0))
    consts = {int(n): _complex(c) for n, c in p.get("constants", {}).items()}
    rep = run_cascade(g, k, E, _complex(p.get("a_k", 1.0)), consts, tol=float(p.get("tol", 1e-10)),
                      closing_tol=float(p.get("closing_tol", 1e-10)))
    _write(cfg.out, "report.json", {**cfg.header(), "report": rep.to_json(), "metric": field_to_json(g, real=True)})
    _write(cfg.out, "coefficients.json", rep.coefficients_json())
    print(f"cascade k={k} E={E}: {rep.verdict.value} (closing {rep.closing_sup:.3e})")
    return rep.exit_code


def _simulate_levels(cfg: RunConfig, built: BuiltSystem, levels, T: float, n_points: int,
                     prefix: str = "traj") -> dict:
    ctl = cfg.controls()
    out = {"levels": []}
    for i, E in enumerate(levels):
        starts = level_initial_states(built.spec, E, n_points, cfg.seed)
        obs = {name: make(E) for name, make in sorted(built.observables.items())}
        rows = []
        for j, s0 in enumerate(starts):
            tr = integrate(built.spec, s0, T, ctl, obs)
            _write(cfg.out, f"{prefix}_E{i}_p{j}.csv", tr.to_csv())
            rows.append({"start": [s0.x, s0.y, s0.px, s0.py], "drift": tr.drift})
        names = sorted(rows[0]["drift"])
        out["levels"].append({"E": E, "points": rows,
                              "max_drift": {n: max(r["drift"][n] for r in rows) for n in names}})
    return out


def cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params
    built = build_system(p.get("system", {"preset": "flat"}), cfg.lattice, cfg.rng())
    levels = p.get("E", list(built.levels))
    levels = [float(e) for e in (levels if isinstance(levels, list) else [levels])]
    T = float(cfg.T if cfg.T is not None else p.get("T", 50.0))
    res = _simulate_levels(cfg, built, levels, T, int(p.get("n_points", 1)))
    _write(cfg.out, "drift.json", {**cfg.header(), "T": T, "system": built.spec.name, "info": built.info, **res})
    for lv in res["levels"]:
        print(f"E={lv['E']}: " + ", ".join(f"{n} {v:.3e}" for n, v in lv["max_drift"].items()))
    return EXIT_OK


def cmd_liouville(cfg: RunConfig) -> int:
    p = cfg.params
    lat = cfg.lattice
    v, w = liouville_profiles(p, lat)
    L = build_liouville(v, w)
    E = float(p.get("E", 1.0))
    rep = run_cascade(L.g, 2, E)
    expected = (-(v - w) * E).without_mean()
    a0_err = (rep.solved[0] - expected).max_coeff()
    built = BuiltSystem(SystemSpec(L.g, name="liouville"),
                        {"F2": lambda e: poly_observable(L.F2, e), "F2_closed": lambda e: L.closed_form})
    T = float(cfg.T if cfg.T is not None else p.get("T", 100.0))
    levels = [float(e) for e in p.get("levels", [E, 2 * E])]
    res = _simulate_levels(cfg, built, levels, T, int(p.get("n_points", 1)), prefix="liouville")
    _write(cfg.out, "liouville.json", {**cfg.header(), "cascade": rep.to_json(), "a0_error": a0_err, "T": T, **res})
    print(f"liouville: {rep.verdict.value}, a_0 error {a0_err:.3e}")
    return rep.exit_code


def cmd_magnetic(cfg: RunConfig) -> int:
    p = cfg.params
    system = p.get("system", {"preset": "dgrw-trig"})
    if system.get("preset") not in MAGNETIC_PRESETS:
        raise UsageError(f"magnetic preset must be one of {', '.join(MAGNETIC_PRESETS)}")
    built = build_system(system, cfg.lattice, cfg.rng())
    levels = [float(e) for e in p.get("levels", built.levels)]
    (name, make), = [(n, m) for n, m in sorted(built.observables.items()) if n != "px"]
    T = float(cfg.T if cfg.T is not None else p.get("T", 50.0))
    ml = multi_level_test(built.spec, make(levels[0]), levels, T=T, controls=cfg.controls(501),
                          n_points=int(p.get("n_points", 8)), seed=cfg.seed,
                          small_tol=float(p.get("small_tol", 1e-6)))
    ratio = ml.ratio(1, 0) if len(levels) > 1 else None
    report = {**cfg.header(), "system": built.spec.name, "observable": name, "audit": built.info, "T": T,
              "levels": ml.table(), "small_levels": ml.small_levels,
              "single_level_signature": ml.single_level_signature, "ratio": ratio}
    _write(cfg.out, "magnetic.json", report)
    print(f"{built.spec.name}: " + ", ".join(f"E={r['E']} drift {r['max_drift']:.3e}" for r in ml.table()))
    return EXIT_OK


# --- scans ----------------------------------------------------------------------

def _scan_constants(cfg: RunConfig, p: dict, g: FourierField) -> list[dict]:
    k = int(p.get("k", 7))
    E = float(p.get("E", 1.0))
    grid = p.get("constants", {str(k - 2): [0, 0.5, -1, [0, 1], [2, -1]]})
    keys = sorted(grid, key=int, reverse=True)
    combos = list(itertools.product(*[[_complex(c) for c in grid[n]] for n in keys]))

    def one(combo):
        consts = {int(n): c for n, c in zip(keys, combo)}
        rep = run_cascade(g, k, E, constants=consts)
        return {"constants": {n: c for n, c in zip(keys, combo)}, "verdict": rep.verdict.value,
                "exit_code": rep.exit_code, "obstructions": {str(n): v for n, v in sorted(rep.obstructions.items())},
                "closing_sup": rep.closing_sup}

    with ThreadPoolExecutor(max_workers=int(p.get("workers", 4))) as ex:
        return list(ex.map(one, combos))


def _constants_summary(points: list[dict]) -> dict:
    ref = points[0]["obstructions"]
    spread = {n: max(abs(pt["obstructions"][n] - ref[n]) for pt in points) for n in ref}
    return {"obstruction_spread": spread, "max_spread": max(spread.values()) if spread else 0.0}


def _scan_cascade_family(p: dict, metrics: list[tuple[float, FourierField]], k: int = 2) -> list[dict]:
    E = float(p.get("E", 1.0))

    def one(item):
        val, g = item
        rep = run_cascade(g, k, E)
        return {"value": val, "verdict": rep.verdict.value, "exit_code": rep.exit_code,
                "closing_sup": rep.closing_sup, "closing_coef": rep.closing_coef}

    with ThreadPoolExecutor(max_workers=int(p.get("workers", 4))) as ex:
        return list(ex.map(one, metrics))


def cmd_scan(cfg: RunConfig) -> int:
    p = cfg.params
    kind = p.get("kind", "constants")
    lat = cfg.lattice
    if kind == "constants":
        g = build_metric(p.get("metric", {"kind": "random"}), lat, cfg.rng())
        points = _scan_constants(cfg, p, g)
        summary = _constants_summary(points)
    elif kind == "liouville-amplitude":
        amps = [float(a) for a in p.get("values", [0.0, 0.25, 0.5, 0.75, 1.0])]
        base = p.get("metric", {})
        ms = [(a, build_metric({**base, "kind": "liouville", "aw": a}, lat, cfg.rng())) for a in amps]
        points = _scan_cascade_family(p, ms)
        summary = {"all_exit_zero": all(pt["exit_code"] == 0 for pt in points)}
    elif kind == "mixed-derivative":
        eps = [float(a) for a in p.get("values", [0.0, 0.05, 0.1, 0.2, 0.4])]
        ms = [(e, mixed_metric(e, lat)) for e in eps]
        points = _scan_cascade_family(p, ms)
        res = [pt["closing_sup"] for pt in points]
        summary = {"monotone": bool(all(b > a for a, b in zip(res, res[1:]))), "residuals": res}
    else:
        raise UsageError(f"unknown scan kind {kind!r}")
    for i, pt in enumerate(points):
        _write(cfg.out, f"point_{i:03d}.json", pt)
    _write(cfg.out, "scan.json", {**cfg.header(), "kind": kind, "points": points, "summary": summary})
    print(f"scan {kind}: {len(points)} points, " + ", ".join(f"{k}={v}" for k, v in summary.items()
                                                              if not isinstance(v, (dict, list))))
    return EXIT_OK


COMMANDS = {
    "cascade": cmd_cascade,
    "simulate": cmd_simulate,
    "scan": cmd_scan,
    "liouville": cmd_liouville,
    "magnetic": cmd_magnetic,
}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="torus-integrals", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--rtol", type=float)
        sp.add_argument("--atol", type=float)
        sp.add_argument("--band", type=int, metavar="N")
        if name in ("simulate", "liouville", "magnetic"):
            sp.add_argument("--T", type=float)
            sp.add_argument("--samples", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (UsageError, MetricError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RealityError, ResidualError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REALITY
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (KeyError, ValueError, TypeError) as exc:
        print(f"bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
