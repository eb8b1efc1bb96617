"""Command-line verification runs.

Configuration is a flat ``key = value`` text file with dotted keys::

    metric.name = randers_const
    metric.b = 0.1, 0.0
    sample.seed = 7
    sample.count = 10
    suites = foliation, contact
    tol.curvature = 1e-7

Explicit points replace random sampling: ``sample.point.1 = 0.3, -0.2 | 1.0, 0.5``
(``x`` before the bar, ``y`` after).  Reports are JSON with sorted keys and
17 significant digits; see ``docs/report_schema.md``.

Exit codes: 0 when every verdict passes, 2 when a verdict fails, 1 on a
configuration or engine error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import contact, foliation, frame, sasaki
from .finsler import DEFAULT_ORDER, DegenerateMetricError, FinslerFunction, get_metric, list_metrics, to_indicatrix
from .jet import DomainError, JetError, JetPoint

SCHEMA_VERSION = "1"
SUITES = ("brackets", "connection", "curvature", "foliation", "contact")

DEFAULT_TOLERANCES = {
    "bracket": 1e-8,
    "koszul": 1e-8,
    "connection": 1e-8,
    "curvature": 1e-7,
    "foliation": 1e-8,
    "positivity": 1e-6,
    "contact": 1e-9,
    "nijenhuis": 1e-7,
}


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    metric: str
    metric_params: dict = field(default_factory=dict)
    seed: int = 0
    count: int = 10
    points: list[JetPoint] | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    suites: tuple[str, ...] = SUITES
    output: str | None = None

    def to_dict(self) -> dict:
        return {
            "metric": {"name": self.metric, **{k: _plain(v) for k, v in self.metric_params.items()}},
            "sample": {
                "seed": self.seed,
                "count": self.count,
                "points": None if self.points is None else [_point(p) for p in self.points],
            },
            "suites": list(self.suites),
            "tolerances": dict(self.tolerances),
        }


# -- configuration -----------------------------------------------------------


def _number_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"expected numbers, got {text!r}") from None


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if "," in text:
        return tuple(_number_list(text))
    return text


def parse_config_text(text: str) -> RunConfig:
    """Parse the flat key-value format (``#`` starts a comment)."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value

    if "metric.name" not in entries:
        raise ConfigError("missing metric.name")
    cfg = RunConfig(metric=entries.pop("metric.name"))
    points = {}
    for key, value in entries.items():
        if key.startswith("metric."):
            cfg.metric_params[key[len("metric."):]] = _scalar(value)
        elif key == "sample.seed":
            cfg.seed = _int(key, value)
        elif key == "sample.count":
            cfg.count = _int(key, value)
            if cfg.count < 1:
                raise ConfigError("sample.count must be positive")
        elif key.startswith("sample.point."):
            points[_int(key, key[len("sample.point."):])] = value
        elif key.startswith("tol."):
            name = key[len("tol."):]
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {name!r}; known: {', '.join(DEFAULT_TOLERANCES)}")
            tol = _float(key, value)
            if not tol > 0:
                raise ConfigError(f"{key} must be positive")
            cfg.tolerances[name] = tol
        elif key == "suites":
            cfg.suites = parse_suites([s.strip() for s in value.split(",") if s.strip()])
        elif key == "output.path":
            cfg.output = value
        else:
            raise ConfigError(f"unknown key {key!r}")
    if points:
        cfg.points = [_parse_point(points[k]) for k in sorted(points)]
    return cfg


def _int(key, value) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _float(key, value) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _parse_point(text: str) -> JetPoint:
    if "|" not in text:
        raise ConfigError(f"point {text!r} must be 'x1, x2, ... | y1, y2, ...'")
    xs, ys = text.split("|", 1)
    x, y = _number_list(xs), _number_list(ys)
    try:
        return JetPoint(tuple(x), tuple(y))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(f"point {text!r}: {exc}") from None


def parse_suites(names: Sequence[str]) -> tuple[str, ...]:
    if not names or list(names) == ["all"]:
        return SUITES
    if list(names) == ["none"]:
        return ()
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s) {', '.join(unknown)}; known: {', '.join(SUITES)}")
    return tuple(s for s in SUITES if s in names)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text)


# -- sampling ----------------------------------------------------------------


def sample_points(n: int, count: int, seed: int) -> list[JetPoint]:
    """``x`` uniform in ``[-1, 1]^n``; ``y`` uniform in direction with ``|y|`` in ``[0.5, 2]``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        x = rng.uniform(-1.0, 1.0, n)
        d = rng.normal(size=n)
        d /= np.linalg.norm(d)
        r = rng.uniform(0.5, 2.0)
        out.append(JetPoint(tuple(float(v) for v in x), tuple(float(v) for v in r * d)))
    return out


def _threads() -> int:
    value = os.environ.get("FTB_THREADS")
    if value is None:
        return min(4, os.cpu_count() or 1)
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(f"FTB_THREADS must be an integer, got {value!r}") from None


def _map(fn: Callable, items: list, threads: int) -> list:
    """Ordered parallel map: results come back in input order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- suites ----------------------------------------------------------------------


def _point(p: JetPoint) -> list:
    return [list(p.x), list(p.y)]


def _plain(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def _verdict(suite: str, claim: str, passed: bool, **extra) -> dict:
    return {"suite": suite, "claim": claim, "verdict": "PASS" if passed else "FAIL", **extra}


def _witness(rows: list[dict], key: str, points: list[JetPoint]) -> dict:
    k = int(np.argmax([r[key] for r in rows]))
    return {"point_index": k, "point": _point(points[k]), "value": rows[k][key]}


def suite_brackets(F, points, ind, tol, threads):
    t = tol["bracket"]

    def one(p):
        r = frame.verify_bracket_table(F, p, t)
        return {"residuals": r.residuals, "item8_sign": r.item8_sign, "max": max(r.residuals.values())}, r.discrepancies

    results = _map(one, points, threads)
    rows = [r for r, _ in results]
    records = [d for _, ds in results for d in ds]
    signs = sorted({r["item8_sign"] for r in rows})
    resolved = all("neither" not in s for s in signs)
    verdicts = [
        _verdict("brackets", "bracket_table_adjudicated", resolved, witness=_witness(rows, "max", points),
                 item8_sign=signs, recorded=len(records)),
    ]
    return {"points": rows}, records, verdicts


def _unambiguous(F, p) -> float:
    """Residual of the stanzas whose symbols are unambiguous."""
    K = sasaki.koszul_connection(F, p)
    n = p.n
    sl = frame.frame_slices(n)
    xi, L = n - 1, 2 * n - 1
    e_L = np.zeros(2 * n)
    e_L[L] = 1.0
    gab = foliation.g_ab(F, p)
    F2 = F.value(p) ** 2
    return max(
        float(np.max(np.abs(K[xi, xi]))),
        float(np.max(np.abs(K[L, L] - e_L))),
        float(np.max(np.abs(K[sl["pbar"], sl["pbar"], L] + gab / F2))),
    )


def suite_connection(F, points, ind, tol, threads):
    def one(p):
        sc = sasaki.koszul_self_consistency(F, p)
        table = sasaki.connection_table(F, p, tol["connection"])
        row = {
            "torsion": sc["torsion"],
            "metric_compatibility": sc["metric"],
            "stanzas": table.stanza_residuals(),
            "unambiguous": _unambiguous(F, p),
            "resolved_R_ij_reading": sasaki.resolve_r_ij_reading(F, p, tol["connection"]),
        }
        row["koszul"] = max(row["torsion"], row["metric_compatibility"])
        return row, table.discrepancies

    results = _map(one, points, threads)
    rows = [r for r, _ in results]
    records = [d for _, ds in results for d in ds]
    koszul_ok = max(r["koszul"] for r in rows) < tol["koszul"]
    unamb_ok = max(r["unambiguous"] for r in rows) < tol["connection"]
    verdicts = [
        _verdict("connection", "koszul_self_consistency", koszul_ok, witness=_witness(rows, "koszul", points)),
        _verdict("connection", "connection_table_adjudicated", unamb_ok,
                 witness=_witness(rows, "unambiguous", points), recorded=len(records)),
    ]
    return {"points": rows, "hypotheses": dict(sasaki.HYPOTHESES)}, records, verdicts


def suite_curvature(F, points, ind, tol, threads):
    t = tol["curvature"]

    def one(p):
        r = sasaki.curvature_relation_check(F, p, tolerance=t)
        records = [
            {
                "metric": F.name,
                "point": _point(p),
                "formula": f"curvature relation ({k})",
                "residual": v,
                "hypothesis": {"R_ij": sasaki.HYPOTHESES["R_ij"]},
                "matching_readings": [{"R_ij": r.reading}] if r.residuals[k] < t else [],
            }
            for k, v in r.hypothesis_residuals.items()
            if v >= t
        ]
        row = {
            "relations": r.residuals,
            "other_combinations": r.other_residuals,
            "R_ij_reading": r.reading,
            "hypothesis_residuals": r.hypothesis_residuals,
            "max": r.max_residual,
        }
        return row, records

    results = _map(one, ind, threads)
    rows = [r for r, _ in results]
    records = [d for _, ds in results for d in ds]
    verdicts = [
        _verdict("curvature", "ambient_induced_relations", max(r["max"] for r in rows) < t,
                 witness=_witness(rows, "max", ind), recorded=len(records)),
    ]
    return {"points": rows}, records, verdicts


def suite_foliation(F, points, ind, tol, threads):
    def one(args):
        p, q = args
        return {
            "bundle_like": {name: foliation.bundle_like_defect(F, p, f) for name, f in foliation.FOLIATIONS.items()},
            "totally_geodesic": {
                name: foliation.totally_geodesic_defect(F, q, f) for name, f in foliation.FOLIATIONS.items()
            },
        }

    rows = _map(one, list(zip(points, ind)), threads)
    verdicts = [
        {"suite": "foliation", **v}
        for v in foliation.foliation_suite(F, points, ind, zero=tol["foliation"], positivity=tol["positivity"])
    ]
    return {"points": rows}, [], verdicts


def suite_contact(F, points, ind, tol, threads):
    def one(p):
        ci = contact.contact_identities(F, p)
        ob = contact.sasakian_obstruction(F, p)
        jb = contact.jbar_comparison(F, p)
        return {
            "identities": ci.residuals,
            "identities_max": max(ci.residuals.values()),
            "d_eta_ratio": ci.d_eta_ratio,
            "obstruction": {
                "max_component": ob.max_component,
                "lambda_min": ob.lambda_min,
                "margin": ob.max_component - ob.lambda_min,
                "flagged": ob.flagged,
                "labels": ob.labels,
                "norms": ob.norms.tolist(),
                "xi_row": ob.xi_row.tolist(),
                "xi_column": ob.xi_column.tolist(),
            },
            "jbar": {k: v for k, v in jb.items() if k != "metric"},
        }

    def nij(p):
        t = contact.nijenhuis_table(F, p, tol["nijenhuis"])
        return {"residuals": t.residuals, "readings": t.readings, "max_norm": t.max_norm,
                "max_curvature": float(np.max(np.abs(t.R)))}

    rows = _map(one, ind, threads)
    nrows = _map(nij, points, threads)
    k = int(np.argmin([r["obstruction"]["margin"] for r in rows]))
    ob = rows[k]["obstruction"]
    obstructed = ob["margin"] >= -tol["positivity"] and ob["max_component"] > tol["positivity"]
    flat = contact.flatness_equivalence_check(F, points, zero=tol["foliation"])
    hv = max(r["residuals"]["N(delta_i, d/dy^j) + R_ij^k delta_k"] for r in nrows)
    verdicts = [
        _verdict("contact", "contact_identities", max(r["identities_max"] for r in rows) < tol["contact"],
                 witness=_witness(rows, "identities_max", ind)),
        _verdict("contact", "never_sasakian", obstructed,
                 witness={"point_index": k, "point": _point(ind[k]), "value": ob["max_component"],
                          "lambda_min": ob["lambda_min"]}),
        _verdict("contact", "integrable_iff_flat", flat["verdict"] == "PASS" and hv < tol["nijenhuis"],
                 witness={"max_nijenhuis": flat["max_nijenhuis"], "max_curvature": flat["max_curvature"],
                          "hv_identity_residual": hv}),
    ]
    return {"points": rows, "nijenhuis": nrows}, [], verdicts


SUITE_RUNNERS = {
    "brackets": suite_brackets,
    "connection": suite_connection,
    "curvature": suite_curvature,
    "foliation": suite_foliation,
    "contact": suite_contact,
}


# -- running --------------------------------------------------------------------


def build_metric(cfg: RunConfig) -> FinslerFunction:
    try:
        return get_metric(cfg.metric, **cfg.metric_params)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for metric {cfg.metric!r}: {exc}") from None


def run(cfg: RunConfig, with_verdicts: bool = True) -> tuple[dict, int]:
    """Execute the configured suites; returns the report and the exit code."""
    F = build_metric(cfg)
    points = cfg.points if cfg.points is not None else sample_points(F.n, cfg.count, cfg.seed)
    for p in points:
        if p.n != F.n:
            raise ConfigError(f"point {_point(p)} has dimension {p.n}, metric has {F.n}")
    threads = _threads()
    report = {
        "schema_version": SCHEMA_VERSION,
        "mode": "verify" if with_verdicts else "report",
        "config": cfg.to_dict(),
        "engine": {"jet_order": DEFAULT_ORDER, "tolerances": dict(cfg.tolerances), "seed": cfg.seed},
        "metric": {"name": F.name, "n": F.n, "params": {k: _plain(v) for k, v in F.params}},
        "points": [_point(p) for p in points],
        "suites": {},
        "discrepancies": [],
    }
    if cfg.suites:
        needs_ind = {"curvature", "foliation", "contact"} & set(cfg.suites)
        ind = [to_indicatrix(F, p) for p in points] if needs_ind else []
        if ind:
            report["indicatrix_points"] = [_point(p) for p in ind]
    verdicts = []
    for name in cfg.suites:
        section, records, vs = SUITE_RUNNERS[name](F, points, ind, cfg.tolerances, threads)
        report["suites"][name] = section
        report["discrepancies"].extend({"suite": name, **r} for r in records)
        verdicts.extend(vs)
    if not with_verdicts:
        return report, 0
    report["verdicts"] = verdicts
    failed = [v for v in verdicts if v["verdict"] != "PASS"]
    report["status"] = "FAIL" if failed else "PASS"
    return report, 2 if failed else 0


# -- serialisation ----------------------------------------------------------------


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj, indent: int = 2) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    out: list[str] = []

    def enc(o, level):
        pad = "\n" + " " * (indent * (level + 1))
        end = "\n" + " " * (indent * level)
        if isinstance(o, dict):
            if not o:
                out.append("{}")
                return
            out.append("{")
            for i, k in enumerate(sorted(o, key=str)):
                out.append(("," if i else "") + pad + _string(str(k)) + ": ")
                enc(o[k], level + 1)
            out.append(end + "}")
        elif isinstance(o, (list, tuple, np.ndarray)):
            seq = o.tolist() if isinstance(o, np.ndarray) else o
            if not len(seq):
                out.append("[]")
                return
            out.append("[")
            for i, v in enumerate(seq):
                out.append(("," if i else "") + pad)
                enc(v, level + 1)
            out.append(end + "]")
        elif o is None:
            out.append("null")
        elif isinstance(o, (bool, np.bool_)):
            out.append("true" if o else "false")
        elif isinstance(o, (int, np.integer)):
            out.append(str(int(o)))
        elif isinstance(o, (float, np.floating)):
            out.append(_format_float(float(o)))
        elif isinstance(o, str):
            out.append(_string(o))
        elif isinstance(o, JetPoint):
            enc(_point(o), level)
        else:
            raise TypeError(f"cannot serialise {type(o).__name__}")

    enc(obj, 0)
    return "".join(out) + "\n"


def _string(s: str) -> str:
    return json.dumps(s, ensure_ascii=True)


def emit_report(report: dict, path: str | Path | None) -> None:
    text = dumps(report)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc


# -- entry point ----------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ftb", description="Point-wise verification of tangent-bundle geometry.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("verify", "run suites and emit verdicts"), ("report", "compute residuals only")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--suite", action="append", default=None, help=f"one of {', '.join(SUITES)} (repeatable)")
        p.add_argument("--out", default=None, help="report path (default: output.path or stdout)")
    sub.add_parser("list-metrics", help="print built-in metric names")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-metrics":
        for name in list_metrics():
            print(name)
        return 0
    try:
        cfg = load_config(args.config)
        if args.suite:
            cfg.suites = parse_suites(args.suite)
        report, code = run(cfg, with_verdicts=args.command == "verify")
        emit_report(report, args.out or cfg.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, DegenerateMetricError, JetError, OSError, np.linalg.LinAlgError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return 1
    if args.command == "verify":
        print(f"status: {report['status']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
