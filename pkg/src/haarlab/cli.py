"""Command-line entry point: run, sweep, verify, catalog, gen."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .approx import CoveringCertificate, verify_covering
from .errors import HaarLabError, SchemaError
from .grids import load, save
from .groups import catalog_names, element, get_group
from .quotient import quotient_map
from .recovery import ProgressionCertificate, verify_progression_cover
from .scenario import Context, Record, load_scenarios, provenance, random_set, run_analysis

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3


def _run_task(args):
    sc, res, idx = args
    return run_analysis(sc, res, idx)


def execute(scenarios, jobs: int = 1):
    """All analyses at all resolutions, in file order."""
    tasks = [(sc, r, i) for sc in scenarios for r in sc.resolutions
             for i in range(len(sc.analyses))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    records, certs = [], []
    for (sc, res, _), (recs, cs) in zip(tasks, results):
        records.extend(recs)
        certs.extend((sc, name, res, rec) for name, rec in cs)
    return records, certs


def exit_code(records) -> int:
    statuses = {r.status for r in records}
    if "fail" in statuses:
        return EXIT_FAIL
    if "refused" in statuses:
        return EXIT_REFUSED
    return EXIT_PASS


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = Record.columns()
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def summary_text(scenarios, records) -> str:
    lines = []
    for sc in scenarios:
        counts = Counter(r.status for r in records if r.scenario == sc.name)
        lines.append(f"scenario {sc.name} on {sc.group} (seed {sc.seed}, haarlab {__version__}): "
                     + ", ".join(f"{k}={counts[k]}" for k in sorted(counts)))
    for r in records:
        if r.status in ("fail", "refused", "unresolved"):
            lines.append(f"  {r.status.upper():10s} {r.check} @res {r.resolution}: "
                         f"{r.quantity}={_fmt(r.value)} bound={_fmt(r.bound)} "
                         f"[{r.sides}] {r.detail} ({r.scenario})")
    return "\n".join(lines) + "\n"


def _write_sets(certs, out: Path):
    """Save the sets a certificate refers to next to it."""
    for sc, name, res, rec in certs:
        ctx = Context(sc, res)
        refs = {}
        for key in ("A", "B"):
            if key in rec:
                path = out / "sets" / f"{sc.name}-{rec[key]}-{res}.grid"
                path.parent.mkdir(parents=True, exist_ok=True)
                save(ctx.set(rec[key]), path)
                refs[key] = str(Path("..") / "sets" / path.name)
        rec["set_files"] = refs
        cpath = out / "certificates" / f"{sc.name}-{name}-{res}.json"
        cpath.parent.mkdir(parents=True, exist_ok=True)
        cpath.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    scs, stem = _scenarios(args)
    records, certs = execute(scs, jobs=args.jobs)
    text = summary_text(scs, records)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.csv").write_text(records_csv(records))
        (out / f"{stem}.summary.txt").write_text(text)
        meta = {"scenarios": [provenance(sc) for sc in scs],
                "counts": dict(sorted(Counter(r.status for r in records).items()))}
        (out / f"{stem}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        _write_sets(certs, out)
    sys.stdout.write(text)
    return exit_code(records)


SWEEP_COLUMNS = ["scenario", "analysis", "check", "quantity", "detail", "resolution",
                 "value", "lower", "upper", "width", "status"]


def sweep_rows(records) -> list:
    """Records grouped per quantity, ordered by resolution."""
    key = lambda r: (r.scenario, r.analysis, r.check, r.quantity, r.detail)  # noqa: E731
    order = {}
    for r in records:
        order.setdefault(key(r), []).append(r)
    rows = []
    for k, recs in order.items():
        for r in sorted(recs, key=lambda r: r.resolution):
            width = r.upper - r.lower if not (math.isnan(r.upper) or math.isnan(r.lower)) else math.nan
            rows.append([*k, r.resolution, r.value, r.lower, r.upper, width, r.status])
    return rows


def transitions(records) -> list:
    """Checks whose status changes with resolution, e.g. unresolved to pass."""
    seq = {}
    for r in sorted(records, key=lambda r: r.resolution):
        seq.setdefault((r.scenario, r.check, r.quantity, r.detail), []).append(
            (r.resolution, r.status))
    out = []
    for (name, check, _, detail), steps in seq.items():
        states = [s for _, s in steps]
        if len(set(states)) > 1:
            out.append(f"{name} {check} {detail}".strip() + ": "
                       + " -> ".join(f"{s}@{res}" for res, s in steps))
    return out


def sweep_resolutions(sc, levels):
    if levels is not None:
        if levels < 2:
            raise SchemaError("a sweep needs at least 2 levels")
        return [sc.resolutions[0] * 2 ** k for k in range(levels)]
    if len(sc.resolutions) < 2:
        raise SchemaError(f"{sc.name}: a sweep needs at least 2 resolutions or --levels")
    return sc.resolutions


def cmd_sweep(args) -> int:
    scs, stem = _scenarios(args)
    scs = [replace(sc, resolutions=sweep_resolutions(sc, args.levels)) for sc in scs]
    records, _ = execute(scs, jobs=args.jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in sweep_rows(records):
        w.writerow([_fmt(v) for v in row])
    text = summary_text(scs, records)
    trans = transitions(records)
    if trans:
        text += "transitions:\n" + "".join(f"  {t}\n" for t in trans)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.sweep.csv").write_text(buf.getvalue())
        (out / f"{stem}.summary.txt").write_text(text)
    sys.stdout.write(text)
    return exit_code(records)


def verify_certificate(cert: dict, sets: dict) -> bool:
    """Re-run only the containment checks a certificate claims."""
    kind = cert.get("kind")
    if kind == "covering":
        G = get_group(cert["group"])
        omega = [element(G, w) for w in cert["omega"]]
        cc = CoveringCertificate(cert["direction"], omega, float(cert["K_claimed"]), False)
        return verify_covering(cc, sets["A"], sets["B"])
    if kind == "progression":
        A = sets["A"]
        pc = ProgressionCertificate(tuple(cert["I"]), [tuple(g) for g in cert["P"]])
        q = quotient_map(A.group) if A.group.circle_axes else None
        return verify_progression_cover(A, pc, q)
    raise SchemaError(f"cannot verify certificate kind {kind!r}")


def cmd_verify(args) -> int:
    path = Path(args.cert)
    try:
        cert = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise SchemaError(f"cannot read certificate: {err}") from None
    files = {k: (path.parent / v) for k, v in cert.get("set_files", {}).items()}
    for item in args.set or []:
        name, _, p = item.partition("=")
        if not p:
            raise SchemaError(f"--set expects NAME=PATH, got {item!r}")
        files[name] = Path(p)
    try:
        sets = {k: load(p) for k, p in files.items()}
    except (OSError, ValueError) as err:
        raise SchemaError(f"cannot read set file: {err}") from None
    ok = verify_certificate(cert, sets)
    print(f"{path.name}: {'valid' if ok else 'INVALID'}")
    return EXIT_PASS if ok else EXIT_FAIL


def catalog_table() -> str:
    lines = [f"{'group':8s} {'dim':>3s} {'ndim':>4s} {'hdim':>4s} {'unimod':>6s}  bm_bracket"]
    for name in catalog_names():
        G = get_group(name)
        lo, hi = G.bm_bracket()
        lines.append(f"{name:8s} {G.dim:3d} {G.ndim:4d} {G.hdim:4d} {str(G.unimodular):>6s}  "
                     f"[{lo!r}, {hi!r}]")
    return "\n".join(lines) + "\n"


def cmd_catalog(args) -> int:
    sys.stdout.write(catalog_table())
    if args.check:
        from .catalog import catalog_check

        bad = 0
        for name in catalog_names():
            rep = catalog_check(name, seed=args.seed or 0)
            bad += not rep.passed
            print(f"{name}: {'ok' if rep.passed else 'VIOLATIONS ' + str(len(rep.violations))}")
        return EXIT_FAIL if bad else EXIT_PASS
    return EXIT_PASS


def cmd_gen(args) -> int:
    try:
        G = get_group(args.group)
    except KeyError:
        raise SchemaError(f"unknown group {args.group!r}") from None
    rng = np.random.default_rng(args.seed or 0)
    A = random_set(G, args.res, rng, smoothing=args.smoothing)
    if args.out:
        save(A, args.out)
    else:
        from .grids import dumps

        sys.stdout.write(dumps(A))
    return EXIT_PASS


def _scenarios(args):
    scs = load_scenarios(args.scenario)
    if args.seed is not None:
        scs = [replace(sc, seed=args.seed) for sc in scs]
    return scs, Path(args.scenario).stem


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="haarlab", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--jobs", type=int, default=1, metavar="N")

    r = sub.add_parser("run", help="run a scenario and emit reports")
    common(r)
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="repeat a scenario over refinement levels")
    common(s)
    s.add_argument("--levels", type=int, metavar="N")
    s.set_defaults(func=cmd_sweep)
    v = sub.add_parser("verify", help="re-check a certificate against set files")
    v.add_argument("--cert", required=True, metavar="PATH")
    v.add_argument("--set", action="append", metavar="NAME=PATH")
    v.set_defaults(func=cmd_verify)
    c = sub.add_parser("catalog", help="print the group table")
    c.add_argument("--check", action="store_true", help="also run the law and measure checks")
    c.add_argument("--seed", type=int, metavar="N")
    c.set_defaults(func=cmd_catalog)
    g = sub.add_parser("gen", help="emit a seeded random grid set")
    g.add_argument("--group", required=True)
    g.add_argument("--res", type=int, default=64)
    g.add_argument("--smoothing", type=int, default=0)
    g.add_argument("--seed", type=int, metavar="N")
    g.add_argument("--out", metavar="PATH")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HaarLabError as err:
        print(f"error [{err.code}]: {err}", file=sys.stderr)
        return err.exit_status


if __name__ == "__main__":
    sys.exit(main())
