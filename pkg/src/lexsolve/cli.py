"""Command-line entry point.

Exit codes: 0 success, 1 domain error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

from lexsolve.adjudicator import POINT_POLICIES, AdjudicationConfig, adjudicate
from lexsolve.agents import (
    DEFENSE,
    DETERMINISTIC,
    EXTERNAL,
    PROSECUTOR,
    ExtractorConfig,
    cluster_debate,
    extract_argument,
    load_clusters,
    merge_arguments,
)
from lexsolve.case_model import SCHEMAS, CaseRecord, parse_case, split_suspects
from lexsolve.errors import LexsolveError, RuleSyntaxError
from lexsolve.kb import ProbeCase, StatuteKB, parse_kb, validate_kb
from lexsolve.metrics import PredictionRecord, eval_pair, evaluate_corpus
from lexsolve.perturb import build_pair_corpus, load_registry, load_specs, pair_from_record, pair_to_record
from lexsolve.report import read_records, render_figures, write_json, write_records, write_rows

log = logging.getLogger("lexsolve")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

CANDIDATE_MODES = ("agents", "all")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    kb_path: str | None = None
    input_paths: list[str] = field(default_factory=list)
    output_path: str | None = None
    seed: int = 0
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    parallelism: int = 1

    def __post_init__(self):
        if self.parallelism < 1:
            raise UsageError("--parallelism must be a positive integer")


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving parallel map."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_kb(path: str) -> StatuteKB:
    return parse_kb(_read_text(path))


def load_probes(path: str, schema: str = "LeCaRDv2") -> list[ProbeCase]:
    """Probe records are case records carrying an ``expected_clauses`` list."""
    out = []
    for rec in read_records(path):
        out.append(ProbeCase(parse_case(rec, schema), frozenset(rec.get("expected_clauses", ()))))
    return out


def _extractor_config(args) -> ExtractorConfig:
    return ExtractorConfig(
        backend=args.backend,
        endpoint_url=args.endpoint or "",
        model_name=args.model or "",
        api_key_env_var=args.api_key_env,
    )


def _parallelism(value: int | None) -> int:
    return (os.cpu_count() or 1) if value is None else value


def _run_config(args) -> RunConfig:
    return RunConfig(
        kb_path=getattr(args, "kb", None),
        input_paths=[p for p in (getattr(args, "inp", None),) if p],
        output_path=getattr(args, "out", None),
        seed=getattr(args, "seed", 0),
        extractor=_extractor_config(args) if hasattr(args, "backend") else ExtractorConfig(),
        parallelism=_parallelism(getattr(args, "parallelism", None)),
    )


# ---------------------------------------------------------------- commands


def cmd_kb_validate(args) -> int:
    kb = _load_kb(args.kb)
    probes = load_probes(args.probes, args.schema) if args.probes else []
    report = validate_kb(kb, probes)
    if args.out:
        write_json(args.out, report.to_dict())
    for f in report.findings:
        print(f"{f.severity}: [{f.section}/{f.kind}] {f.target}: {f.message}", file=sys.stderr)
    print(f"{len(report.errors)} error(s), {len(report.findings) - len(report.errors)} warning(s)")
    return EXIT_OK if report.ok else EXIT_DOMAIN


def _arguments_for(case: CaseRecord, extractor: ExtractorConfig, exclusivity, client=None):
    p = extract_argument(case, PROSECUTOR, extractor, client)
    d = extract_argument(case, DEFENSE, extractor, client)
    return p, d, merge_arguments(p, d, exclusivity)


def _service_client(extractor: ExtractorConfig):
    if extractor.backend != EXTERNAL:
        return None
    from lexsolve.agents.client import ServiceClient

    return ServiceClient(extractor)


def cmd_adjudicate(args) -> int:
    cfg = _run_config(args)
    kb = _load_kb(args.kb)
    probes = load_probes(args.probes, args.schema) if args.probes else []
    report = validate_kb(kb, probes)
    if not report.ok:
        print(f"knowledge base failed validation with {len(report.errors)} error(s)", file=sys.stderr)
        return EXIT_DOMAIN
    clusters = load_clusters(args.clusters) if args.clusters else load_clusters()
    cases: list[CaseRecord] = []
    for rec in read_records(args.inp):
        cases.extend(split_suspects(parse_case(rec, args.schema)))
    config = AdjudicationConfig(point_policy=args.point_policy)
    client = _service_client(cfg.extractor)

    def one(case: CaseRecord) -> dict[str, Any]:
        try:
            candidates = None
            work = case
            if case.narrative.strip() and (args.candidates == "agents" or not case.facts):
                _, _, merged = _arguments_for(case, cfg.extractor, kb.exclusivity_axioms, client)
                if not case.facts:
                    work = replace(case, facts=merged.facts)
                if args.candidates == "agents":
                    candidates = sorted(cluster_debate(merged.candidates, clusters))
            judgment = adjudicate(work, kb, candidates, config)
            out = judgment.to_dict()
            out["candidates"] = candidates if candidates is not None else "all"
            return out
        except LexsolveError as exc:
            log.warning("case %s: %s", case.case_id, exc)
            return {"case_id": case.case_id, "error": type(exc).__name__, "message": str(exc)}

    try:
        records = _pmap(one, cases, cfg.parallelism)
    finally:
        if client is not None:
            client.close()
    write_records(args.out, records)
    failed = sum(1 for r in records if "error" in r)
    print(f"{len(records)} judgment(s), {failed} error record(s)")
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _run_config(args)
    kb = _load_kb(args.kb) if args.kb else None
    exclusivity = kb.exclusivity_axioms if kb else ()
    cases = [parse_case(rec, args.schema) for rec in read_records(args.inp)]
    client = _service_client(cfg.extractor)

    def one(case: CaseRecord) -> dict[str, Any]:
        try:
            p, d, merged = _arguments_for(case, cfg.extractor, exclusivity, client)
        except LexsolveError as exc:
            return {"case_id": case.case_id, "error": type(exc).__name__, "message": str(exc)}
        return {
            "case_id": case.case_id,
            "prosecutor": p.to_dict(),
            "defense": d.to_dict(),
            "candidates": sorted(merged.candidates),
            "conflicts": [[a.to_dict(), b.to_dict()] for a, b in merged.conflicts],
        }

    try:
        records = _pmap(one, cases, cfg.parallelism)
    finally:
        if client is not None:
            client.close()
    write_records(args.out, records)
    return EXIT_OK


def cmd_perturb(args) -> int:
    cfg = _run_config(args)
    registry = load_registry(args.rules) if args.rules else load_registry()
    specs = load_specs(args.specs)
    unknown = sorted({name for s in specs for name in s.rules if name not in registry.rules})
    if unknown:
        print(f"unknown rule(s): {', '.join(unknown)}", file=sys.stderr)
        return EXIT_DOMAIN
    bases = [parse_case(rec, args.schema) for rec in read_records(args.inp)]
    chunks = _pmap(lambda b: build_pair_corpus([b], specs, cfg.seed, registry), bases, cfg.parallelism)
    pairs = [p for chunk in chunks for p in chunk]
    write_records(args.out, (pair_to_record(p) for p in pairs))
    print(f"{len(pairs)} pair(s)")
    return EXIT_OK


def _load_predictions(path: str) -> dict[str, PredictionRecord]:
    preds: dict[str, PredictionRecord] = {}
    for rec in read_records(path):
        if "error" in rec:
            continue
        p = PredictionRecord.from_dict(rec)
        if p.case_id in preds:
            log.warning("duplicate prediction for %s; keeping the first", p.case_id)
            continue
        preds[p.case_id] = p
    return preds


def cmd_evaluate(args) -> int:
    pairs = [pair_from_record(r) for r in read_records(args.inp)]
    preds = _load_predictions(args.predictions)
    if not preds:
        print("no predictions", file=sys.stderr)
        return EXIT_DOMAIN
    if not pairs:
        print("no pairs", file=sys.stderr)
        return EXIT_DOMAIN
    needed = sorted({p.base_case.case_id for p in pairs} | {p.pair_id for p in pairs})
    missing = [cid for cid in needed if cid not in preds]
    if missing:
        print(f"missing predictions for: {', '.join(missing)}", file=sys.stderr)
        return EXIT_DOMAIN
    clusters = load_clusters(args.clusters) if args.clusters else load_clusters()
    report = evaluate_corpus([eval_pair(p) for p in pairs], preds, clusters, args.baseline_group)
    os.makedirs(args.out, exist_ok=True)
    data = report.to_dict()
    write_json(os.path.join(args.out, "report.json"), data)
    write_rows(
        os.path.join(args.out, "report.csv"),
        ("section", "group", "metric", "value", "numerator", "denominator"),
        report.flat_rows(),
    )
    figures = render_figures(data, args.out)
    print(f"report written to {args.out} ({len(figures)} figure(s))")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_extractor_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=(DETERMINISTIC, EXTERNAL), default=DETERMINISTIC)
    p.add_argument("--endpoint", help="URL of the text-generation service (External backend)")
    p.add_argument("--model", help="model name sent to the service")
    p.add_argument(
        "--api-key-env",
        default="LEXSOLVE_API_KEY",
        help="name of the environment variable holding the bearer token",
    )


def _add_parallelism(p: argparse.ArgumentParser) -> None:
    p.add_argument("--parallelism", type=int, default=None, help="worker cap (default: logical cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexsolve", description="Solver-grounded statute adjudication toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kb-validate", help="validate a rule-language knowledge base")
    p.add_argument("--kb", required=True)
    p.add_argument("--probes", help="probe case records with expected_clauses")
    p.add_argument("--schema", choices=SCHEMAS, default="LeCaRDv2")
    p.add_argument("--out", help="where to write the validation report")
    p.set_defaults(func=cmd_kb_validate)

    p = sub.add_parser("adjudicate", help="produce solver-verified judgments")
    p.add_argument("--kb", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schema", choices=SCHEMAS, default="LeCaRDv2")
    p.add_argument("--candidates", choices=CANDIDATE_MODES, default="agents")
    p.add_argument("--point-policy", choices=POINT_POLICIES, default="Mid")
    p.add_argument("--clusters")
    p.add_argument("--probes")
    _add_extractor_flags(p)
    _add_parallelism(p)
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("extract", help="run the prosecution and defense extractors")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kb", help="knowledge base supplying exclusivity axioms")
    p.add_argument("--schema", choices=SCHEMAS, default="LeCaRDv2")
    _add_extractor_flags(p)
    _add_parallelism(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("perturb", help="build a paired perturbation corpus")
    p.add_argument("--in", dest="inp", required=True, help="base case records")
    p.add_argument("--specs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rules", help="edit-rule registry (default: bundled)")
    p.add_argument("--schema", choices=SCHEMAS, default="LeCaRDv2")
    _add_parallelism(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("evaluate", help="compute the metric battery")
    p.add_argument("--in", dest="inp", required=True, help="pair records")
    p.add_argument("--predictions", required=True)
    p.add_argument("--clusters")
    p.add_argument("--baseline-group")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, UsageError, RuleSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LexsolveError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
