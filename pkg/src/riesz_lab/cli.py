"""The ``riesz-lab`` command line driver.

Every subcommand validates its whole configuration first (flags plus an
optional ``key = value`` file, flags winning), then computes, prints a JSON
report and, with ``--out DIR``, writes ``DIR/report.json`` and tidy CSV
tables under ``DIR/tables``.  Exit status: 0 when every selected check
passes, 1 when some check fails, 2 for an invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

from .errors import CheckFailed, ConfigInvalid, RieszLabError

# ---------------------------------------------------------------- formatting


def _jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and callable(x.item):  # numpy scalars
        return _jsonable(x.item())
    if isinstance(x, (str, int, bool)) or x is None:
        return x
    return str(x)


def exact_columns(x) -> tuple[str, str, str]:
    """(numerator, denominator, decimal); the first two are empty for floats."""
    if isinstance(x, int) and not isinstance(x, bool):
        x = Fraction(x)
    if isinstance(x, Fraction):
        return str(x.numerator), str(x.denominator), repr(float(x))
    return "", "", repr(float(x))


class Output:
    """Collects the report and tables of one run."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.hash = config_hash(config)
        self.tables: dict[str, tuple[list[str], list[list[Any]]]] = {}
        self.report: dict[str, Any] = {}
        self.failures: list[Any] = []
        self.lines: list[str] = []

    def table(self, name: str, header: list[str], rows: list[list[Any]]) -> None:
        self.tables[name] = (header, rows)

    def fail(self, item: Any) -> None:
        self.failures.append(item)

    @property
    def passed(self) -> bool:
        return not self.failures

    def document(self) -> dict:
        doc = {
            "command": self.command,
            "config": self.config,
            "config_hash": self.hash,
            "pass": self.passed,
            "failures": self.failures,
            "results": self.report,
        }
        return _jsonable(doc)

    def write(self, out: Optional[Path]) -> None:
        for line in self.lines:
            print(line)
        text = json.dumps(self.document(), sort_keys=True)
        print(text)
        if out is None:
            return
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.document(), sort_keys=True, indent=2) + "\n")
        tdir = out / "tables"
        for name, (header, rows) in sorted(self.tables.items()):
            tdir.mkdir(exist_ok=True)
            buf = io.StringIO()
            buf.write(f"# config_hash={self.hash}\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_jsonable(v) for v in r])
            (tdir / f"{name}.csv").write_text(buf.getvalue())


def config_hash(config: dict) -> str:
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- config parsing


def read_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys use underscores or dashes."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config file {path}: {exc}") from exc
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    if not out:
        raise ConfigInvalid(f"config file {path} is empty")
    return out


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigInvalid(f"not a rational number: {text!r}") from exc


def _int(text, name: str, lo: int = 0) -> int:
    try:
        v = int(str(text))
    except ValueError as exc:
        raise ConfigInvalid(f"{name} must be an integer, got {text!r}") from exc
    if v < lo:
        raise ConfigInvalid(f"{name} must be >= {lo}")
    return v


def parse_psi(text: str):
    """``power:c:p`` | ``logpower:c:p:a`` | ``capped:M:power:c:p``."""
    from .moments import Capped, LogPower, PowerLaw

    parts = str(text).split(":")
    try:
        if parts[0] == "power" and len(parts) == 3:
            return PowerLaw(_fraction(parts[1]), _fraction(parts[2]))
        if parts[0] == "logpower" and len(parts) == 4:
            return LogPower(float(_fraction(parts[1])), _fraction(parts[2]), int(parts[3]))
        if parts[0] == "capped" and len(parts) >= 3:
            return Capped(parse_psi(":".join(parts[2:])), _fraction(parts[1]))
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(f"bad Psi {text!r}: {exc}") from exc
    raise ConfigInvalid(f"unknown Psi descriptor {text!r}")


def parse_phi(text: str):
    """``power:c:alpha``."""
    from .moments import PhiPower

    parts = str(text).split(":")
    if parts[0] == "power" and len(parts) == 3:
        try:
            return PhiPower(_fraction(parts[1]), _fraction(parts[2]))
        except ValueError as exc:
            raise ConfigInvalid(f"bad Phi {text!r}: {exc}") from exc
    raise ConfigInvalid(f"unknown Phi descriptor {text!r}")


def _boundary(q: int, text: Optional[str]):
    from .tree_core import parse_boundary_set

    if not text:
        raise ConfigInvalid("a boundary set (--ends) is required")
    try:
        return parse_boundary_set(text, q)
    except (RieszLabError, ValueError) as exc:
        raise ConfigInvalid(f"bad boundary set {text!r}: {exc}") from exc


def _vertex(text: str, q: int):
    from .tree_core import Vertex

    try:
        return Vertex.parse(text, q)
    except (RieszLabError, ValueError) as exc:
        raise ConfigInvalid(f"bad vertex {text!r}: {exc}") from exc


def _end(text: str, q: int):
    from .tree_core import End

    try:
        return End.parse(text, q)
    except (RieszLabError, ValueError) as exc:
        raise ConfigInvalid(f"bad end {text!r}: {exc}") from exc


def _ts(text: Optional[str]) -> list[Fraction]:
    if not text:
        raise ConfigInvalid("at least one t value (--t) is required")
    out = [_fraction(s) for s in str(text).replace(";", ",").split(",") if s.strip()]
    for t in out:
        if not 0 < t < 1:
            raise ConfigInvalid(f"t = {t} is not in (0, 1)")
    return out


def _q(args) -> int:
    if args.q is None:
        raise ConfigInvalid("--q is required")
    q = _int(args.q, "q", 2)
    return q


# ---------------------------------------------------------------- subcommands


def cmd_kernels(args, out: Output) -> None:
    from . import tree_kernels as K
    from .tree_core import Vertex, ball

    q = _q(args)
    rows = []
    asked = False
    for name, pairs, fn, kind in (
        ("green", args.green, K.green, "vv"),
        ("first_passage", args.first_passage, K.first_passage, "vv"),
        ("hmc", args.hmc, K.harmonic_measure_cylinder, "vv"),
        ("martin", args.martin, K.martin, "ve"),
        ("busemann", args.busemann, None, "ve"),
    ):
        for a, b in pairs or []:
            asked = True
            x = _vertex(a, q)
            y = _vertex(b, q) if kind == "vv" else _end(b, q)
            val = K.busemann(x, y) if name == "busemann" else fn(x, y, q)
            rows.append([name, a, b, *exact_columns(val)])
            out.lines.append(f"{name} {a} {b} {val}")
    if args.table is not None:
        asked = True
        radius = _int(args.table, "table", 0)
        o = Vertex()
        for v in ball(q, radius):
            rows.append(["green", str(v), "o", *exact_columns(K.green(v, o, q))])
    if not asked:
        raise ConfigInvalid("kernels needs --green, --martin, --busemann, --hmc, --first-passage or --table")
    out.table("kernels", ["kernel", "x", "y", "numerator", "denominator", "decimal"], rows)
    out.report["kernels"] = [{"kernel": r[0], "x": r[1], "y": r[2], "value": (r[3] if r[4] == "1" else f"{r[3]}/{r[4]}") if r[3] else r[5]} for r in rows]


def _build_u(args, q: int, radius: int):
    """(u, psi, E, mu) from the --u selector."""
    from .moments import geometric_riesz_measure, main1_example, profile_function
    from .tree_functions import TreeFunction

    sel = (args.u or "profile").split(":")
    if sel[0] == "profile":
        E = _boundary(q, args.ends)
        psi = parse_psi(args.psi or "power:1:1")
        try:
            return profile_function(psi, E, radius), psi, E, None
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
    if sel[0] == "exp":
        c = _fraction(sel[1]) if len(sel) > 1 else Fraction(1)
        b = _fraction(sel[2]) if len(sel) > 2 else Fraction(q)
        E = _boundary(q, args.ends) if args.ends else None
        psi = parse_psi(args.psi) if args.psi else None
        u = TreeFunction.radial(q, radius, lambda n: c * b**n)
        return u, psi, E, geometric_riesz_measure(q, c, b)
    if sel[0] == "main1-example":
        p = _fraction(sel[1]) if len(sel) > 1 else Fraction(1, 2)
        return (*main1_example(q, p, radius),)
    raise ConfigInvalid(f"unknown function selector {args.u!r}")


def _levels_table(out: Output, name: str, level_sums, partial) -> None:
    rows = []
    for n, (a, s) in enumerate(zip(level_sums, partial)):
        rows.append([n, *exact_columns(a), *exact_columns(s)])
    out.table(name, ["level", "numerator", "denominator", "decimal", "partial_numerator", "partial_denominator", "partial_decimal"], rows)


def cmd_riesz(args, out: Output) -> None:
    from .errors import NotSubharmonic
    from .tree_functions import riesz_measure

    q = _q(args)
    radius = _int(args.radius if args.radius is not None else 5, "radius", 1)
    u, psi, E, mu0 = _build_u(args, q, radius)
    try:
        mu = riesz_measure(u)
    except NotSubharmonic as exc:
        out.fail({"check": "subharmonic", "witness": str(exc.witness)})
        out.report["subharmonic"] = False
        return
    out.report["subharmonic"] = True
    sums = []
    for n in range(radius):
        from .tree_core import level_vertices

        sums.append(sum((mu.density.get(v, Fraction(0)) for v in level_vertices(q, n)), Fraction(0)))
    partial = [sum(sums[: i + 1], Fraction(0)) for i in range(len(sums))]
    _levels_table(out, "riesz_levels", sums, partial)
    out.report["level_sums"] = sums
    if mu0 is not None:
        bad = [str(v) for v in u.vertices() if len(v) < radius and mu(v) != mu0(v)]
        out.report["matches_supplied_measure"] = not bad
        if bad:
            out.fail({"check": "riesz_measure", "vertices": bad[:10]})


def _green_battery(args, out: Output) -> None:
    from .truncation import build_truncation, verify_green_bound

    q = _q(args)
    E = _boundary(q, args.ends)
    ts = _ts(args.t)
    extra = _int(args.extra if args.extra is not None else 3, "extra", 0)
    rows = []
    reports = []
    for t in ts:
        tr = build_truncation(E, t)
        rep = verify_green_bound(tr, tr.k + extra)
        d = rep.as_dict()
        reports.append(d)
        rows.append([q, t, rep.k, rep.gamma_size, *exact_columns(rep.min_ratio), rep.passed])
        if not rep.passed:
            out.fail({"t": t, "vertices": rep.failures[:10]})
    out.table("green_bound", ["q", "t", "k", "gamma_size", "min_ratio_numerator", "min_ratio_denominator", "min_ratio_decimal", "pass"], rows)
    out.report["green_bound"] = reports


def cmd_green_bound(args, out: Output) -> None:
    _green_battery(args, out)


def cmd_moment(args, out: Output) -> None:
    from .moments import boundary_integral_tree, extended_moment, first_moment
    from .tree_functions import riesz_measure

    q = _q(args)
    levels = _int(args.levels if args.levels is not None else 12, "levels", 1)
    radius = _int(args.radius if args.radius is not None else 6, "radius", 1)
    if args.integral:
        E = _boundary(q, args.ends)
        psi = parse_psi(args.psi or "power:1:1")
        enc = boundary_integral_tree(psi, E)
        out.report["boundary_integral"] = enc.as_dict()
        _levels_table(out, "boundary_integral", [b - a for a, b in zip([0] + list(enc.partial_sums[:-1]), enc.partial_sums)], enc.partial_sums)
        return
    u, psi, E, mu = _build_u(args, q, radius)
    if mu is None:
        mu = riesz_measure(u)
    if args.phi:
        if E is None:
            E = _boundary(q, args.ends)
        res = extended_moment(mu, parse_phi(args.phi), E, levels=levels)
    else:
        res = first_moment(mu, levels)
    out.report["moment"] = res.as_dict()
    _levels_table(out, "moment_levels", res.level_sums, res.partial_sums)


def cmd_verify(args, out: Output) -> None:
    from . import moments as M

    theorem = args.theorem
    if not theorem:
        raise ConfigInvalid("--theorem is required")
    if theorem == "green":
        _green_battery(args, out)
        return
    q = _q(args)
    radius = _int(args.radius if args.radius is not None else (4 if theorem == "main1" else 8), "radius", 1)
    levels = _int(args.levels if args.levels is not None else 12, "levels", 1)
    if theorem == "main1" and not args.u:
        args.u = "main1-example"
    u, psi, E, mu = _build_u(args, q, radius)
    if psi is None:
        psi = parse_psi(args.psi or "power:1:1")
    if E is None:
        E = _boundary(q, args.ends)
    try:
        if theorem == "main1":
            rep = M.verify_main1(u, psi, E, mu=mu, levels=levels)
        elif theorem == "converse":
            rep = M.verify_converse(u, psi, E, mu=mu, levels=levels)
        elif theorem in ("main2", "converse2"):
            if not args.phi:
                raise ConfigInvalid(f"--phi is required for {theorem}")
            phi = parse_phi(args.phi)
            fn = M.verify_main2 if theorem == "main2" else M.verify_converse2
            rep = fn(u, psi, phi, E, mu=mu, levels=levels)
        else:
            raise ConfigInvalid(f"unknown theorem {theorem!r}")
    except RieszLabError as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        out.fail({"error": type(exc).__name__, "message": str(exc)})
        return
    out.report["verify"] = rep.as_dict()
    partial = list(rep.partial_sums)
    _levels_table(out, "partial_sums", [b - a for a, b in zip([0] + partial[:-1], partial)], partial)
    if not rep.passed:
        out.fail({"theorem": theorem, "verdict": rep.verdict})


def _mc_config(args):
    from .mc_engine import McConfig

    return McConfig(
        seed=_int(args.seed if args.seed is not None else 20240601, "seed", 0),
        replicas=_int(args.replicas if args.replicas is not None else 8, "replicas", 1),
        paths=_int(args.paths if args.paths is not None else 12_500, "paths", 1),
    )


def cmd_simulate(args, out: Output) -> None:
    from . import mc_engine as MC
    from . import tree_kernels as K

    cfg = _mc_config(args)
    target = args.target or "cylinder"
    rows = []
    if target in ("cylinder", "visits", "truncated"):
        q = _q(args)
        x = _vertex(args.x or "o", q)
        y = _vertex(args.y or "0", q)
        if target == "cylinder":
            est = MC.srw_cylinder_measure(x, y, q, cfg)
            oracle = K.harmonic_measure_cylinder(x, y, q)
        elif target == "visits":
            est = MC.srw_expected_visits(x, y, q, cfg)
            oracle = K.green(x, y, q)
        else:
            from .truncation import build_truncation, truncated_green

            if y.word:
                raise ConfigInvalid("truncated visits are counted at the root (--y o)")
            E = _boundary(q, args.ends)
            tr = build_truncation(E, _ts(args.t)[0])
            est = MC.srw_expected_visits(x, y, q, cfg, tr)
            oracle = truncated_green(tr, x)
        rows.append(est.row(f"{target}({x},{y})", oracle))
    elif target == "weighted":
        from .weighted_tree import ConductanceTree, green_weighted, solve_f

        if not args.weighted:
            raise ConfigInvalid("--weighted FILE is required")
        q_ext = _int(args.q_ext if args.q_ext is not None else 2, "q_ext", 1)
        with open(args.weighted) as fh:
            tree = ConductanceTree.from_csv(fh, q_ext)
        f = solve_f(tree)
        x = _vertex(args.x or "o", 10**9)
        y = _vertex(args.y or "o", 10**9)
        est = MC.weighted_walk_visits(tree, x, y, cfg)
        rows.append(est.row(f"weighted_visits({x},{y})", green_weighted(tree, f, x, y)))
    elif target in ("wos", "wos-green"):
        from .disk_geom import arc_harmonic_measure

        z = complex(args.z or "0.5")
        if target == "wos":
            zeta, r = (args.arc or "1:0.2").split(":")
            est = MC.wos_harmonic_measure(z, [(complex(zeta), float(r))], cfg)
            rows.append(est.row(f"wos_arc({z})", arc_harmonic_measure(z, complex(zeta), float(r))))
        else:
            E = [complex(s) for s in (args.disk_e or "1").split(",")]
            t = float(_ts(args.t)[0])
            est = MC.wos_truncated_green_disk(z, E, t, cfg)
            g = math.log(1 / abs(z))
            row = est.row(f"wos_truncated_green({z})")
            lo = g / 18 - 3 * est.ci99
            hi = g + 3 * est.ci99
            row.update({"lower": g / 18, "upper": g, "pass": lo <= est.mean <= hi})
            rows.append(row)
    else:
        raise ConfigInvalid(f"unknown simulation target {target!r}")
    for r in rows:
        if r.get("pass") is False:
            out.fail(r["target"])
    out.report["estimates"] = rows
    out.table("estimates", ["target", "mean", "n", "ci99", "oracle", "pass"], [[r.get(k, "") for k in ("target", "mean", "n", "ci99", "oracle", "pass")] for r in rows])


def disk_battery(seed: int = 1) -> list[list[Any]]:
    """(op, params, value, reference, abs_err, pass) rows of the disk formula checks."""
    import cmath
    import random

    from . import disk_geom as D
    from .moments import PowerLaw

    rows = []

    def add(op, params, value, ref, tol):
        err = abs(value - ref)
        rows.append([op, params, value, ref, err, err <= tol])

    for r in (0.0, 0.3, 0.6, 0.9):
        for a in (0.0, 1.0, 2.5, 4.0):
            z = cmath.rect(r, a)
            add("poisson_normalization", f"z={z:.6f}", D.poisson_normalization(z), 1.0, 1e-10)
    rng = random.Random(seed)
    for _ in range(20):
        z = cmath.rect(0.95 * rng.random(), 2 * math.pi * rng.random())
        w = cmath.rect(0.95 * rng.random(), 2 * math.pi * rng.random())
        add("green_vs_hyperbolic_form", f"z={z:.6f};w={w:.6f}", D.green(z, w), D.green_hyp_form(z, w), 1e-12)
        add("metric_relation", f"z={z:.6f}", D.boundary_gap_from_hyp(z), 1 - abs(z), 1e-12)
    b = D.blaschke_family("geometric", 0.5)
    add("blaschke_geometric", "r=1/2", b.value, 1.0, 1e-12)
    h = D.blaschke_family("harmonic")
    rows.append(["blaschke_harmonic", "s=1", h.partial, "divergent", "", h.verdict == "divergent_certified"])
    for _ in range(20):
        zeta = cmath.exp(2j * math.pi * rng.random())
        t = rng.uniform(0.01, 0.99)
        res = D.nuw_disk_bound(zeta, t)
        rows.append(["arc_lemma", f"zeta={zeta:.6f};t={t:.6f}", res["nu"], res["closed_form"], res["abs_err"], res["pass"]])
    E = D.BoundarySetD((1,))
    val = D.boundary_integral_disk(PowerLaw(1, Fraction(1, 2), 2), E).value
    add("boundary_integral_power_half", "E={1}", val, D.powerlaw_single_point(1, 0.5), 1e-6 * abs(val))
    return rows


def cmd_disk(args, out: Output) -> None:
    seed = _int(args.seed if args.seed is not None else 1, "seed", 0)
    rows = disk_battery(seed)
    for r in rows:
        if not r[5]:
            out.fail({"op": r[0], "params": r[1]})
    out.table("disk_battery", ["op", "params", "value", "reference", "abs_err", "pass"], rows)
    out.report["checks"] = len(rows)
    out.report["passed"] = sum(1 for r in rows if r[5])


def cmd_report(args, out: Output) -> None:
    if not args.inputs:
        raise ConfigInvalid("report needs --inputs DIR [DIR ...]")
    runs = []
    for d in args.inputs:
        p = Path(d) / "report.json"
        try:
            doc = json.loads(p.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"cannot read {p}: {exc}") from exc
        runs.append({"dir": str(d), "command": doc.get("command"), "config_hash": doc.get("config_hash"), "pass": doc.get("pass")})
        if not doc.get("pass"):
            out.fail(str(d))
    out.report["runs"] = runs
    out.table("runs", ["dir", "command", "config_hash", "pass"], [[r["dir"], r["command"], r["config_hash"], r["pass"]] for r in runs])


COMMANDS = {
    "kernels": cmd_kernels,
    "riesz": cmd_riesz,
    "green-bound": cmd_green_bound,
    "moment": cmd_moment,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "disk": cmd_disk,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riesz-lab", description="Potential theory on trees and the disk: exact checks and simulations.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; command-line flags take precedence")
    common.add_argument("--out", help="directory for report.json and tables/*.csv")
    common.add_argument("--q", help="tree parameter (every vertex has q+1 neighbours)")
    common.add_argument("--ends", help="boundary set: end literals like '0:(0)' separated by ';', or 'cantor:BASE:0,1'")
    common.add_argument("--psi", help="Psi descriptor, e.g. power:1:1/2")
    common.add_argument("--phi", help="Phi descriptor, e.g. power:1:1/2")
    common.add_argument("--u", help="function: profile | exp:c:b | main1-example[:p]")
    common.add_argument("--t", help="comma-separated truncation levels in (0,1), as num/den")
    common.add_argument("--radius", help="ball radius for tree functions")
    common.add_argument("--levels", help="number of moment levels")
    common.add_argument("--extra", help="levels beyond k(t) checked by the Green bound battery")
    common.add_argument("--seed")
    common.add_argument("--paths", help="paths per replica")
    common.add_argument("--replicas")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("kernels", parents=[common], help="exact kernel values")
    p.add_argument("--green", nargs=2, action="append", metavar=("X", "Y"))
    p.add_argument("--first-passage", nargs=2, action="append", metavar=("X", "Y"))
    p.add_argument("--hmc", nargs=2, action="append", metavar=("X", "Y"), help="harmonic measure of the cylinder below Y seen from X")
    p.add_argument("--martin", nargs=2, action="append", metavar=("X", "XI"))
    p.add_argument("--busemann", nargs=2, action="append", metavar=("X", "XI"))
    p.add_argument("--table", help="emit G(x, o) on the ball of this radius")
    sub.add_parser("riesz", parents=[common], help="Riesz measure of a subharmonic function")
    sub.add_parser("green-bound", parents=[common], help="truncated Green function bounds")
    p = sub.add_parser("moment", parents=[common], help="first or extended moments, or a boundary integral")
    p.add_argument("--integral", action="store_true", help="compute the boundary integral of Psi instead")
    p = sub.add_parser("verify", parents=[common], help="run one of the verifiers")
    p.add_argument("--theorem", choices=["green", "main1", "converse", "main2", "converse2"])
    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo estimate against an exact oracle")
    p.add_argument("--target", choices=["cylinder", "visits", "truncated", "weighted", "wos", "wos-green"])
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--z", help="disk point, Python complex literal")
    p.add_argument("--arc", help="ZETA:R for the arc {|xi - ZETA| <= R}")
    p.add_argument("--disk-e", help="comma-separated boundary points of the disk")
    p.add_argument("--weighted", help="conductance CSV (parent, child_label, numerator, denominator)")
    p.add_argument("--q-ext", help="branching of the homogeneous exterior")
    sub.add_parser("disk", parents=[common], help="disk formula battery")
    p = sub.add_parser("report", parents=[common], help="aggregate earlier runs")
    p.add_argument("--inputs", nargs="+")
    return parser


def _merge_config(args, parser) -> dict:
    """Fill unset flags from the config file and return the effective config."""
    if args.config:
        values = read_config_file(args.config)
        for k, v in values.items():
            if k in ("config", "command"):
                raise ConfigInvalid(f"key {k!r} is not allowed in a config file")
            if not hasattr(args, k):
                raise ConfigInvalid(f"unknown config key {k!r} for {args.command}")
            if getattr(args, k) in (None, False):
                setattr(args, k, v)
    cfg = {k: v for k, v in sorted(vars(args).items()) if v not in (None, False) and k not in ("config", "out")}
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        print("riesz-lab: error: a subcommand is required", file=sys.stderr)
        return 2
    try:
        config = _merge_config(args, parser)
        out = Output(args.command, config)
        COMMANDS[args.command](args, out)
    except ConfigInvalid as exc:
        print(json.dumps({"error": "ConfigInvalid", "message": str(exc)}), file=sys.stderr)
        return 2
    except CheckFailed as exc:
        print(json.dumps({"error": "CheckFailed", "failures": _jsonable(exc.failures)}), file=sys.stderr)
        return 1
    out.write(Path(args.out) if args.out else None)
    if not out.passed:
        print(json.dumps({"error": "CheckFailed", "failures": _jsonable(out.failures)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
