"""The ``forge`` command line.

Every artifact is JSON (or JSON lines) carrying ``forge_version`` and the
``config`` that produced it; ``forge replay`` re-runs that config and checks
the bytes match.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .logic import FiniteStructure, LogicError


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    argv: list
    seed: int = 0
    stages: int | None = None
    bound: int | None = None
    measure: str | None = None
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def threads() -> int:
    raw = os.environ.get("FORGE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"FORGE_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError("FORGE_THREADS must be at least 1")
    return n


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _emit(doc: dict, cfg: RunConfig) -> None:
    doc = {"forge_version": __version__, "config": cfg.to_json(), **doc}
    text = _dump(doc)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not JSON: {e}")


# --------------------------------------------------------------------------
# loading inputs


def load_theory(arg: str):
    """A compiled theory from a JSON artifact, a DSL file or a catalog name."""
    from .catalog import CatalogError, catalog, load
    from .dsl import parse_theory
    from .theory import PithyTheory, pithy_expand, relationalize

    p = Path(arg)
    if p.is_file():
        if p.suffix == ".json":
            data = _read_json(arg)
            data = data.get("theory", data)
            return PithyTheory.from_json(data)
        spec = parse_theory(p.read_text())
        return pithy_expand(spec if spec.relational else relationalize(spec))
    try:
        return load(arg)
    except CatalogError:
        raise UsageError(f"{arg!r} is neither a file nor a catalog entry")


def load_structure(arg: str) -> FiniteStructure:
    data = _read_json(arg)
    return FiniteStructure.from_json(data.get("structure", data))


def load_trace(arg: str):
    from .construction import ConstructionTrace
    data = _read_json(arg)
    return ConstructionTrace.from_json(data.get("trace", data))


def _tuple(text: str) -> tuple:
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad tuple {text!r}; use comma-separated labels like 0,2")


# --------------------------------------------------------------------------
# subcommands


def cmd_compile(a, cfg):
    from .catalog import catalog_source
    from .dsl import parse_theory
    from .theory import pithy_expand, relationalize

    p = Path(a.source)
    if p.is_file():
        text = p.read_text()
    else:
        try:
            text = catalog_source(a.source)
        except LogicError:
            raise UsageError(f"{a.source!r} is neither a file nor a catalog entry")
    spec = parse_theory(text)
    th = pithy_expand(spec if spec.relational else relationalize(spec))
    _emit({"theory": th.to_json()}, cfg)


def cmd_check_sap(a, cfg):
    from .closure import check_strong_amalgamation
    from .theory import AgeOracle
    rep = check_strong_amalgamation(AgeOracle(load_theory(a.theory)), a.bound)
    _emit({"report": rep.to_json()}, cfg)
    return 0 if rep.passed else 1


def cmd_check_dup(a, cfg):
    from .closure import check_duplication
    rep = check_duplication(load_theory(a.theory), a.width)
    _emit({"report": rep.to_json()}, cfg)
    return 0 if rep.passed else 1


def cmd_dcl(a, cfg):
    from .closure import dcl
    s = load_structure(a.structure)
    _emit({"tuple": list(_tuple(a.tuple)), "dcl": sorted(dcl(s, _tuple(a.tuple)))}, cfg)


def cmd_acl(a, cfg):
    from .closure import acl, orbit_sizes
    s = load_structure(a.structure)
    tup = _tuple(a.tuple)
    sizes = orbit_sizes(s, tup)
    _emit({"tuple": list(tup), "threshold": a.threshold,
           "orbit_sizes": {str(b): k for b, k in sorted(sizes.items())},
           "acl": sorted(acl(s, tup, a.threshold))}, cfg)


def cmd_build(a, cfg):
    from .construction import run
    t = run(load_theory(a.theory), a.stages, enlarge_below=a.enlarge_below)
    _emit({"trace": t.to_json()}, cfg)


def cmd_trace_dump(a, cfg):
    from .construction import to_svg
    t = load_trace(a.trace)
    if a.svg:
        Path(a.svg).write_text(to_svg(t))
    rank = t.rank()
    _emit({"stage": t.stage, "positions": t.size,
           "r": [str(x) for x in t.r],
           "v": [float(b) for b in t.v],
           "atoms": sorted([n, [rank[e] for e in ids]] for n, ids in t.holds)}, cfg)


def _sample_chunk(job):
    theory_json, stages, n, measure, seed, lo, hi = job
    from .measures import MeasureSpec
    from .sampler import base_trace, sample_many
    from .theory import PithyTheory
    th = PithyTheory.from_json(theory_json)
    t = base_trace(th, stages)
    return [s.to_json() for s in sample_many(t, n, MeasureSpec.parse(measure), seed, hi - lo, lo)]


def cmd_sample(a, cfg):
    from .sampler import default_stages
    th = load_theory(a.theory)
    stages = a.base_stages if a.base_stages is not None else default_stages(th.name)
    cfg.stages = stages
    k = threads()
    step = max(1, -(-a.draws // (4 * k)))
    jobs = [(th.to_json(), stages, a.n, a.measure, a.seed, lo, min(a.draws, lo + step))
            for lo in range(0, a.draws, step)]
    if k > 1 and len(jobs) > 1:
        import multiprocessing
        with multiprocessing.Pool(k) as pool:
            chunks = pool.map(_sample_chunk, jobs)
    else:
        chunks = [_sample_chunk(j) for j in jobs]
    lines = [_dump({"forge_version": __version__, "config": cfg.to_json()})]
    d = 0
    for chunk in chunks:
        for s in chunk:
            lines.append(_dump({"draw": d, "seed": a.seed, "base_stages": stages,
                                "structure": s}))
            d += 1
    text = "".join(lines)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_graphon_export(a, cfg):
    from .graphon import export_step_graphon
    from .measures import MeasureSpec
    W = export_step_graphon(load_trace(a.trace), MeasureSpec.parse(a.measure))
    _emit({"graphon": W.to_json()}, cfg)


def _load_graphon(path):
    from .graphon import StepGraphon
    data = _read_json(path)
    return StepGraphon.from_json(data.get("graphon", data))


def cmd_graphon_sample(a, cfg):
    from .graphon import w_random
    W = _load_graphon(a.graphon)
    out = [w_random(W, a.n, a.seed, d).to_json() for d in range(a.draws)]
    _emit({"samples": out}, cfg)


def _generator(path, n, seed, measure):
    from .graphon import interior_sampler, interior_w_random
    from .measures import MeasureSpec
    data = _read_json(path)
    if "graphon" in data:
        return interior_w_random(_load_graphon(path), n, seed)
    if "trace" in data:
        return interior_sampler(load_trace(path), n, MeasureSpec.parse(measure), seed)
    raise UsageError(f"{path} holds neither a trace nor a graphon")


def cmd_compare(a, cfg):
    from .graphon import distribution_compare
    from .rng import derive
    ga = _generator(a.a, a.n, derive(a.seed, "a"), a.measure)
    gb = _generator(a.b, a.n, derive(a.seed, "b"), a.measure)
    rep = distribution_compare(ga, gb, a.n, a.draws)
    _emit({"report": rep.to_json()}, cfg)


def cmd_verify(a, cfg):
    from .measures import MeasureSpec
    from .verify import run_suite, to_junit
    reports = run_suite(a.suite, a.seed, MeasureSpec.parse(a.measure))
    _emit({"suite": a.suite, "reports": [r.to_json() for r in reports]}, cfg)
    if a.junit:
        Path(a.junit).write_text(to_junit(reports, f"forge-{a.suite}"))
    return 0 if all(r.verdict != "FAIL" for r in reports) else 1


def cmd_replay(a, cfg):
    p = Path(a.artifact)
    if not p.is_file():
        raise UsageError(f"no such file: {a.artifact}")
    before = p.read_bytes()
    first = before.split(b"\n", 1)[0]
    try:
        old = json.loads(first)["config"]
    except (json.JSONDecodeError, KeyError):
        raise UsageError(f"{a.artifact} carries no embedded config")
    code = main(old["argv"])
    after = Path(old["out"]).read_bytes() if old.get("out") else None
    same = code == 0 and after == before
    sys.stdout.write(_dump({"artifact": a.artifact, "identical": same}))
    return 0 if same else 1


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forge", description=(
        "Invariant random structures from pithy theories: compile, analyse, "
        "build traces, sample and verify."))
    ap.add_argument("--version", action="version", version=f"forge {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        p.add_argument("--out", help="write the JSON artifact here instead of stdout")
        return p

    p = add("compile", cmd_compile, "compile a DSL file or catalog entry")
    p.add_argument("source")
    p = add("check-sap", cmd_check_sap, "strong amalgamation over the age")
    p.add_argument("theory")
    p.add_argument("--bound", type=int, default=4)
    p = add("check-dup", cmd_check_dup, "duplication of quantifier-free types")
    p.add_argument("theory")
    p.add_argument("--width", type=int, default=3)
    p = add("dcl", cmd_dcl, "definable closure in a finite structure")
    p.add_argument("structure")
    p.add_argument("--tuple", default="")
    p = add("acl", cmd_acl, "orbit sizes and thresholded algebraic closure")
    p.add_argument("structure")
    p.add_argument("--tuple", default="")
    p.add_argument("--threshold", type=int, default=1)
    p = add("build", cmd_build, "run the construction")
    p.add_argument("theory")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--enlarge-below", type=int, default=None,
                   help="skip enlargement once the trace has this many positions")
    p = add("trace-dump", cmd_trace_dump, "summarize a trace, optionally as SVG")
    p.add_argument("trace")
    p.add_argument("--svg")
    p = add("sample", cmd_sample, "draw finite structures")
    p.add_argument("theory")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--draws", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--measure", default="cauchy")
    p.add_argument("--base-stages", type=int, default=None)
    p = sub.add_parser("graphon", help="step graphons")
    gsub = p.add_subparsers(dest="graphon_command", required=True)
    g = gsub.add_parser("export", help="export a graph trace as a step graphon")
    g.set_defaults(fn=cmd_graphon_export)
    g.add_argument("trace")
    g.add_argument("--measure", default="cauchy")
    g.add_argument("--out")
    g = gsub.add_parser("sample", help="W-random graphs")
    g.set_defaults(fn=cmd_graphon_sample)
    g.add_argument("graphon")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("--draws", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    p = add("compare", cmd_compare, "total variation between two generators (trace or graphon)")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("-n", type=int, default=3)
    p.add_argument("--draws", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--measure", default="cauchy")
    p = add("verify", cmd_verify, "statistical test batteries")
    p.add_argument("--suite", choices=["quick", "full"], default="quick")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--measure", default="cauchy")
    p.add_argument("--junit")
    p = sub.add_parser("replay", help="re-run an artifact's embedded config and compare bytes")
    p.set_defaults(fn=cmd_replay)
    p.add_argument("artifact")
    return ap


def _config(a, argv) -> RunConfig:
    name = a.command + (f" {a.graphon_command}" if a.command == "graphon" else "")
    return RunConfig(
        command=name,
        argv=list(argv),
        seed=getattr(a, "seed", 0),
        stages=getattr(a, "stages", None) or getattr(a, "base_stages", None),
        bound=getattr(a, "bound", None) or getattr(a, "width", None),
        measure=getattr(a, "measure", None),
        out=getattr(a, "out", None),
    )


def _error(kind: str, message: str, **extra) -> None:
    sys.stderr.write(_dump({"error": kind, "message": message, **extra}))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        a = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        threads()
        code = a.fn(a, _config(a, argv))
        return 0 if code is None else code
    except UsageError as e:
        _error("usage", str(e))
        return 2
    except LogicError as e:
        from .construction import DuplicationFailure
        if isinstance(e, DuplicationFailure):
            sys.stderr.write(_dump(e.to_json()))
        else:
            _error(type(e).__name__, str(e))
        return 1
    except ValueError as e:
        _error("value", str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
