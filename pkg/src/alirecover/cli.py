"""Command-line entry point wiring the toolkit into reproducible pipelines.

Exit codes: 0 success, 2 validation error (bad input, bad config, missing
file), 3 stage failure (an otherwise valid run that failed while executing).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .adjudication_service import (
    AdjudicationService,
    DecisionStore,
    build_queue,
    make_server,
)
from .analysis import (
    ali_by_patient,
    ali_pairs,
    fit_logistic,
    flowchart,
    missingness_profiles,
    restrict_source,
    source_from_ehr,
    source_from_recovery,
    source_from_review,
    write_ali_pairs,
    write_flowchart,
    write_missingness,
)
from .cohort_store import (
    Cohort,
    SimConfig,
    derive_diagnosis_pools,
    generate_synthetic,
    load_cohort,
    write_cohort,
    write_truth,
)
from .errors import AliRecoverError, DegenerateOutcome, InvalidConfig, Separation
from .icd_catalog import load_catalog
from .llm_enhancer import LlmRunConfig, run_enhancement
from .matcher import match_roadmap, read_matches, write_matches
from .phenotype import load_thresholds
from .recovery import build_component_matches, recover_cohort, write_evidence, write_statuses
from .resources import DEFAULT_THRESHOLDS, DEMO_CATALOG, ORIGINAL_ROADMAP
from .roadmap import (
    Roadmap,
    TermStatus,
    parse_roadmap,
    roadmap_stats,
    serialize_roadmap,
)

logger = logging.getLogger(__name__)


class _StageFailure(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class _JsonLogFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps({
            "level": record.levelname.lower(),
            "logger": record.name,
            "message": record.getMessage(),
        }, sort_keys=True)


def _setup_logging(json_logs: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(level=logging.INFO, handlers=[handler], force=True)


def _load_roadmap_arg(path: str | None, include_proposed: bool) -> Roadmap:
    roadmap = parse_roadmap(path or ORIGINAL_ROADMAP)
    return roadmap.with_proposals_retained() if include_proposed else roadmap


def _statuses_arg(include_proposed: bool) -> tuple[TermStatus, ...]:
    if include_proposed:
        return (TermStatus.RETAINED, TermStatus.PROPOSED)
    return (TermStatus.RETAINED,)


# --- simple subcommands -------------------------------------------------------


def _cmd_catalog(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.path or DEMO_CATALOG, format=args.format)
    if args.lookup:
        entry = catalog.get(args.lookup)
        if entry is None:
            print(f"{args.lookup}: not in catalog", file=sys.stderr)
            return 2
        print(f"{entry.code}\t{entry.description}")
        return 0
    print(json.dumps({
        "path": str(args.path or DEMO_CATALOG),
        "entries": len(catalog),
        "vocabulary": catalog.vocabulary_size(),
    }, indent=2, sort_keys=True))
    return 0


def _cmd_roadmap(args: argparse.Namespace) -> int:
    roadmap = parse_roadmap(args.path or ORIGINAL_ROADMAP)
    print(json.dumps(roadmap_stats(roadmap), indent=2, sort_keys=True))
    return 0


def _cmd_match(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog or DEMO_CATALOG)
    roadmap = parse_roadmap(args.roadmap or ORIGINAL_ROADMAP)
    sample = None
    if args.cohort:
        sample = load_cohort(args.cohort).all_diagnosis_codes
    results, summary = match_roadmap(
        roadmap, catalog,
        sample_codes=sample,
        statuses=_statuses_arg(args.include_proposed),
        mode=args.mode,
    )
    if args.out:
        write_matches(results, roadmap, args.out)
    print(json.dumps({
        "terms": summary.terms,
        "matched_codes": summary.matched_codes,
        "in_sample_codes": summary.in_sample_codes,
    }, indent=2, sort_keys=True))
    return 0


def _cmd_recover(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog or DEMO_CATALOG)
    thresholds = load_thresholds(args.thresholds or DEFAULT_THRESHOLDS)
    roadmap = _load_roadmap_arg(args.roadmap, args.include_proposed)
    cohort = load_cohort(args.cohort)
    result = recover_cohort(cohort, roadmap, catalog, thresholds)
    recovered_cells = {(r.patient_id, r.component) for r in result.records}
    write_statuses(result.statuses_by_patient, args.out, recovered_cells)
    if args.evidence:
        write_evidence(result.records, args.evidence)
    print(json.dumps({
        "patients": result.summary.patients,
        "missing_before": result.summary.missing_before,
        "recovered": result.summary.recovered,
        "percent_recovered": round(result.summary.percent_recovered, 4),
        "unknown_diagnosis_codes": result.summary.unknown_diagnosis_codes,
    }, indent=2, sort_keys=True))
    return 0


def _write_ali_csv(source, path: Path) -> dict:
    values, undefined = ali_by_patient(source)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", "unhealthy", "non_missing", "ali"])
        for pid in sorted(set(values) | set(undefined)):
            if pid in values:
                v = values[pid]
                writer.writerow([pid, v.numerator, v.denominator, repr(v.value)])
            else:
                writer.writerow([pid, "", "", ""])
    return {"patients": len(values) + len(undefined), "undefined": len(undefined)}


def _cmd_ali(args: argparse.Namespace) -> int:
    thresholds = load_thresholds(args.thresholds or DEFAULT_THRESHOLDS)
    cohort = load_cohort(args.cohort)
    source = source_from_ehr(cohort, thresholds)
    summary = _write_ali_csv(source, Path(args.out))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog or DEMO_CATALOG)
    roadmap = parse_roadmap(args.roadmap or ORIGINAL_ROADMAP)
    results, _ = match_roadmap(roadmap, catalog)
    matches = build_component_matches(results, roadmap)
    pools, background = derive_diagnosis_pools(
        catalog, {component: per_code.keys() for component, per_code in matches.items()}
    )
    config = SimConfig(review_count=args.review_count)
    synthetic = generate_synthetic(
        args.seed, args.n, config, pools, background, name=f"synthetic_{args.seed}"
    )
    out = Path(args.out)
    written = write_cohort(synthetic.cohort, out)
    written.append(write_truth(synthetic.truth, out / "truth.csv"))
    print(json.dumps({
        "patients": len(synthetic.cohort),
        "reviewed": synthetic.cohort.n_reviewed,
        "files": [str(p) for p in written],
    }, indent=2, sort_keys=True))
    return 0


def _cmd_enhance(args: argparse.Namespace) -> int:
    original = parse_roadmap(args.roadmap or ORIGINAL_ROADMAP)
    config = LlmRunConfig.from_env(
        mode=args.mode,
        iterations=args.iterations,
        transcript_dir=args.transcripts,
        replay_dir=args.replay,
        **({"endpoint": args.endpoint} if args.endpoint else {}),
        **({"model": args.model} if args.model else {}),
    )
    result = run_enhancement(config, original_roadmap=original)
    serialize_roadmap(result.roadmap, args.out)
    print(json.dumps({
        "mode": args.mode,
        "runs": len(result.transcripts),
        "failed_runs": result.failed_runs,
        "terms": result.roadmap.record_count(),
        "distinct_phrases": result.roadmap.phrase_count(*TermStatus),
        "out": str(args.out),
    }, indent=2, sort_keys=True))
    return 0


def _cmd_adjudicate_serve(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog or DEMO_CATALOG)
    roadmap = parse_roadmap(args.roadmap)
    match_results = read_matches(args.matches)
    cohort = load_cohort(args.cohort) if args.cohort else None
    queue = build_queue(roadmap, match_results, cohort, catalog)
    store = DecisionStore(args.log, {item.term_id for item in queue})
    service = AdjudicationService(
        roadmap, queue, store,
        static_dir=args.static if args.static else None,
    )
    server = make_server(service, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    logger.info("serving %d queued terms on http://%s:%d/", len(queue), host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# --- analyze ------------------------------------------------------------------


def _roadmap_specs(specs: list[str] | None) -> dict[str, str | None]:
    if not specs:
        return {"original": None}
    roadmaps: dict[str, str | None] = {}
    for spec_text in specs:
        name, _, path = spec_text.partition("=")
        if not path:
            name, path = Path(spec_text).stem, spec_text
        if name in roadmaps:
            raise InvalidConfig(f"duplicate roadmap name {name!r}")
        roadmaps[name] = path
    return roadmaps


def _build_sources(args: argparse.Namespace, include_review: bool):
    catalog = load_catalog(args.catalog or DEMO_CATALOG)
    thresholds = load_thresholds(args.thresholds or DEFAULT_THRESHOLDS)
    cohort = load_cohort(args.cohort)
    sources = {"ehr": source_from_ehr(cohort, thresholds)}
    for name, path in _roadmap_specs(args.roadmap).items():
        roadmap = _load_roadmap_arg(path, args.include_proposed)
        sources[name] = source_from_recovery(
            recover_cohort(cohort, roadmap, catalog, thresholds)
        )
    review = source_from_review(cohort) if include_review else {}
    if review:
        reviewed_ids = set(review)
        sources = {name: restrict_source(s, reviewed_ids) for name, s in sources.items()}
        sources["review"] = review
    return cohort, sources


def _cmd_analyze_flowchart(args: argparse.Namespace) -> int:
    _, sources = _build_sources(args, include_review=True)
    counts = flowchart(sources)
    write_flowchart(counts, args.out)
    print(json.dumps({
        name: {
            "healthy": c.healthy, "unhealthy": c.unhealthy, "missing": c.missing,
            "recovered": c.recovered, "recovered_percent": round(c.recovered_percent, 4),
        }
        for name, c in sorted(counts.items())
    }, indent=2, sort_keys=True))
    return 0


def _cmd_analyze_missingness(args: argparse.Namespace) -> int:
    _, sources = _build_sources(args, include_review=False)
    profiles = missingness_profiles(sources)
    write_missingness(profiles, args.out)
    print(json.dumps({
        name: {
            "non_missing_quartiles": list(p.non_missing_quartiles),
            "missing_quartiles": list(p.missing_quartiles),
        }
        for name, p in sorted(profiles.items())
    }, indent=2, sort_keys=True))
    return 0


def _cmd_analyze_pairs(args: argparse.Namespace) -> int:
    _, sources = _build_sources(args, include_review=False)
    source_b = args.b or next(name for name in sources if name != "ehr")
    pairs = ali_pairs(sources, args.a, source_b)
    write_ali_pairs(pairs, args.out)
    print(json.dumps({
        "source_a": pairs.source_a,
        "source_b": pairs.source_b,
        "pairs": len(pairs.rows),
        "excluded_patients": len(pairs.excluded_patients),
    }, indent=2, sort_keys=True))
    return 0


def _cmd_analyze_regress(args: argparse.Namespace) -> int:
    cohort, sources = _build_sources(args, include_review=False)
    engaged = {p.patient_id: p.engaged for p in cohort.patients}
    report: dict[str, dict] = {}
    for name, source in sorted(sources.items()):
        values, undefined = ali_by_patient(source)
        pids = sorted(values)
        try:
            fit = fit_logistic(
                [engaged[pid] for pid in pids],
                [values[pid].value for pid in pids],
            )
        except (Separation, DegenerateOutcome) as exc:
            report[name] = {"error": f"{type(exc).__name__}: {exc}"}
            continue
        entry = fit.to_json()
        entry["patients"] = len(pids)
        entry["excluded_all_missing"] = len(undefined)
        report[name] = entry
    Path(args.out).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(json.dumps({
        name: {k: entry[k] for k in ("intercept", "slope") if k in entry}
        for name, entry in report.items()
    }, indent=2, sort_keys=True))
    return 0


# --- pipeline -----------------------------------------------------------------


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _cmd_pipeline_run(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        raise InvalidConfig(f"config file not found: {config_path}")
    try:
        cfg = json.loads(config_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise InvalidConfig(f"config is not valid JSON: {exc}") from exc

    out_dir = Path(cfg.get("out_dir", ""))
    if not cfg.get("out_dir"):
        raise InvalidConfig("config must set out_dir")
    catalog_path = Path(cfg.get("catalog") or DEMO_CATALOG)
    thresholds_path = Path(cfg.get("thresholds") or DEFAULT_THRESHOLDS)
    roadmap_cfg: dict[str, str | None] = cfg.get("roadmaps") or {"original": None}
    include_proposed = bool(cfg.get("include_proposed", True))
    cohort_cfg = cfg.get("cohort") or {"seed": 7, "n": 100}

    # validation happens before any stage runs
    inputs = {"config": config_path, "catalog": catalog_path, "thresholds": thresholds_path}
    for name, path in roadmap_cfg.items():
        if path is not None:
            inputs[f"roadmap_{name}"] = Path(path)
    if "dir" in cohort_cfg:
        cohort_dir = Path(cohort_cfg["dir"])
        if not cohort_dir.is_dir():
            raise InvalidConfig(f"cohort dir not found: {cohort_dir}")
    for name, path in inputs.items():
        if not Path(path).is_file():
            raise InvalidConfig(f"{name} file not found: {path}")

    out_dir.mkdir(parents=True, exist_ok=True)
    state: dict = {"outputs": []}

    def _stage_load() -> None:
        state["catalog"] = load_catalog(catalog_path)
        state["thresholds"] = load_thresholds(thresholds_path)
        roadmaps: dict[str, Roadmap] = {}
        for name, path in roadmap_cfg.items():
            roadmap = parse_roadmap(path or ORIGINAL_ROADMAP, name=name)
            roadmaps[name] = roadmap.with_proposals_retained() if include_proposed else roadmap
        state["roadmaps"] = roadmaps

    def _stage_cohort() -> None:
        if "dir" in cohort_cfg:
            state["cohort"] = load_cohort(cohort_cfg["dir"])
            state["seed"] = None
            return
        seed = int(cohort_cfg.get("seed", 7))
        n = int(cohort_cfg.get("n", 100))
        review_count = int(cohort_cfg.get("review_count", 100))
        results, _ = match_roadmap(
            parse_roadmap(ORIGINAL_ROADMAP), state["catalog"]
        )
        matches = build_component_matches(results, parse_roadmap(ORIGINAL_ROADMAP))
        pools, background = derive_diagnosis_pools(
            state["catalog"],
            {component: per_code.keys() for component, per_code in matches.items()},
        )
        synthetic = generate_synthetic(
            seed, n, SimConfig(review_count=review_count), pools, background,
            name=f"synthetic_{seed}",
        )
        cohort_dir = out_dir / "cohort"
        state["outputs"] += write_cohort(synthetic.cohort, cohort_dir)
        state["outputs"].append(write_truth(synthetic.truth, cohort_dir / "truth.csv"))
        state["cohort"] = synthetic.cohort
        state["seed"] = seed

    def _stage_match() -> None:
        cohort: Cohort = state["cohort"]
        sample = cohort.all_diagnosis_codes
        state["match_summaries"] = {}
        for name, roadmap in state["roadmaps"].items():
            results, summary = match_roadmap(roadmap, state["catalog"], sample_codes=sample)
            path = out_dir / f"matches_{name}.csv"
            write_matches(results, roadmap, path)
            state["outputs"].append(path)
            state["match_summaries"][name] = {
                "terms": summary.terms,
                "matched_codes": summary.matched_codes,
                "in_sample_codes": summary.in_sample_codes,
            }

    def _stage_recover() -> None:
        state["recoveries"] = {}
        for name, roadmap in state["roadmaps"].items():
            result = recover_cohort(
                state["cohort"], roadmap, state["catalog"], state["thresholds"]
            )
            cells = {(r.patient_id, r.component) for r in result.records}
            path = out_dir / f"recovered_{name}.csv"
            write_statuses(result.statuses_by_patient, path, cells)
            state["outputs"].append(path)
            path = out_dir / f"evidence_{name}.csv"
            write_evidence(result.records, path)
            state["outputs"].append(path)
            state["recoveries"][name] = result

    def _stage_ali() -> None:
        state["sources"] = {"ehr": source_from_ehr(state["cohort"], state["thresholds"])}
        for name, result in state["recoveries"].items():
            state["sources"][name] = source_from_recovery(result)
        for name, source in state["sources"].items():
            path = out_dir / f"ali_{name}.csv"
            _write_ali_csv(source, path)
            state["outputs"].append(path)

    def _stage_analyze() -> None:
        cohort: Cohort = state["cohort"]
        sources = state["sources"]
        review = source_from_review(cohort)
        if review:
            reviewed_ids = set(review)
            restricted = {
                name: restrict_source(s, reviewed_ids) for name, s in sources.items()
            }
            restricted["review"] = review
            path = out_dir / "flowchart.csv"
            write_flowchart(flowchart(restricted), path)
            state["outputs"].append(path)
        path = out_dir / "missingness.csv"
        write_missingness(missingness_profiles(sources), path)
        state["outputs"].append(path)
        for name in state["recoveries"]:
            path = out_dir / f"ali_pairs_ehr_{name}.csv"
            write_ali_pairs(ali_pairs(sources, "ehr", name), path)
            state["outputs"].append(path)

        engaged = {p.patient_id: p.engaged for p in cohort.patients}
        report: dict[str, dict] = {}
        for name, source in sorted(sources.items()):
            values, undefined = ali_by_patient(source)
            pids = sorted(values)
            try:
                fit = fit_logistic(
                    [engaged[pid] for pid in pids],
                    [values[pid].value for pid in pids],
                )
                entry = fit.to_json()
            except (Separation, DegenerateOutcome) as exc:
                entry = {"error": f"{type(exc).__name__}: {exc}"}
            entry["excluded_all_missing"] = len(undefined)
            report[name] = entry
        path = out_dir / "regression.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        state["outputs"].append(path)
        state["regression"] = report

    stages = [
        ("load", _stage_load),
        ("cohort", _stage_cohort),
        ("match", _stage_match),
        ("recover", _stage_recover),
        ("ali", _stage_ali),
        ("analyze", _stage_analyze),
    ]
    for stage_name, stage in stages:
        try:
            stage()
            logger.info("stage %s done", stage_name)
        except Exception as exc:
            raise _StageFailure(stage_name, exc) from exc

    manifest = {
        "version": __version__,
        "seed": state.get("seed"),
        "config": cfg,
        "inputs": {name: _sha256(Path(path)) for name, path in sorted(inputs.items())},
        "outputs": {
            str(Path(path).relative_to(out_dir)): _sha256(Path(path))
            for path in sorted(state["outputs"], key=str)
        },
        "match_summaries": state["match_summaries"],
        "recovery": {
            name: {
                "missing_before": r.summary.missing_before,
                "recovered": r.summary.recovered,
                "percent_recovered": round(r.summary.percent_recovered, 4),
            }
            for name, r in state["recoveries"].items()
        },
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(json.dumps({
        "out_dir": str(out_dir),
        "outputs": len(manifest["outputs"]),
        "manifest": str(manifest_path),
    }, indent=2, sort_keys=True))
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alirecover",
        description=(
            "Recover missing allostatic load index components from ICD-10 "
            "diagnosis codes and compare sources."
        ),
    )
    parser.add_argument("--log-json", action="store_true", help="emit JSON logs on stderr")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="inspect an ICD-10 catalog file")
    p.add_argument("--path", help="catalog file (default: bundled demo catalog)")
    p.add_argument("--format", choices=["tsv", "csv"], help="override extension inference")
    p.add_argument("--lookup", help="print one code's description and exit")
    p.set_defaults(handler=_cmd_catalog)

    p = sub.add_parser("roadmap", help="summarize a roadmap file")
    p.add_argument("--path", help="roadmap CSV (default: bundled original)")
    p.set_defaults(handler=_cmd_roadmap)

    p = sub.add_parser("match", help="match roadmap terms against a catalog")
    p.add_argument("--roadmap", help="roadmap CSV (default: bundled original)")
    p.add_argument("--catalog", help="catalog file (default: bundled demo catalog)")
    p.add_argument("--cohort", help="cohort directory for in-sample restriction")
    p.add_argument("--mode", choices=["token", "substring"], default="token")
    p.add_argument("--include-proposed", action="store_true",
                   help="let proposed terms participate alongside retained ones")
    p.add_argument("--out", help="write per-term matches CSV here")
    p.set_defaults(handler=_cmd_match)

    p = sub.add_parser("recover", help="apply recovery to a cohort")
    p.add_argument("--cohort", required=True, help="cohort directory")
    p.add_argument("--roadmap", help="roadmap CSV (default: bundled original)")
    p.add_argument("--catalog", help="catalog file (default: bundled demo catalog)")
    p.add_argument("--thresholds", help="threshold CSV (default: bundled)")
    p.add_argument("--include-proposed", action="store_true",
                   help="promote proposed terms to retained before recovery")
    p.add_argument("--out", required=True, help="per-cell status CSV")
    p.add_argument("--evidence", help="evidence CSV (code and term per recovery)")
    p.set_defaults(handler=_cmd_recover)

    p = sub.add_parser("ali", help="compute the index per patient from EHR readings")
    p.add_argument("--cohort", required=True, help="cohort directory")
    p.add_argument("--thresholds", help="threshold CSV (default: bundled)")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(handler=_cmd_ali)

    p = sub.add_parser("simulate", help="generate a seeded synthetic cohort")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--review-count", type=int, default=100,
                   help="patients given chart-review statuses (default 100)")
    p.add_argument("--catalog", help="catalog file (default: bundled demo catalog)")
    p.add_argument("--roadmap", help="roadmap used to derive auxiliary code pools")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("enhance", help="expand the roadmap with an LLM endpoint or replay")
    p.add_argument("--mode", choices=["baseline", "context"], required=True)
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--roadmap", help="existing roadmap CSV (default: bundled original)")
    p.add_argument("--out", required=True, help="output roadmap CSV")
    p.add_argument("--transcripts", help="directory to archive run transcripts")
    p.add_argument("--replay", help="replay transcripts from this directory instead of calling out")
    p.add_argument("--endpoint", help="chat-completion endpoint (default: $LLM_ENDPOINT)")
    p.add_argument("--model", help="model name (default: $LLM_MODEL)")
    p.set_defaults(handler=_cmd_enhance)

    p = sub.add_parser("adjudicate", help="clinician adjudication service")
    adjudicate_sub = p.add_subparsers(dest="adjudicate_command", required=True)
    p = adjudicate_sub.add_parser("serve", help="serve the review API and UI")
    p.add_argument("--roadmap", required=True, help="roadmap CSV with proposed terms")
    p.add_argument("--matches", required=True, help="matches CSV from the match subcommand")
    p.add_argument("--log", required=True, help="append-only decision log (JSONL)")
    p.add_argument("--cohort", help="cohort directory for per-code patient counts")
    p.add_argument("--catalog", help="catalog file for code descriptions")
    p.add_argument("--static", help="directory with the built review UI")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(handler=_cmd_adjudicate_serve)

    p = sub.add_parser("analyze", help="comparison analyses across sources")
    analyze_sub = p.add_subparsers(dest="analyze_command", required=True)
    for name, handler, extra in [
        ("flowchart", _cmd_analyze_flowchart, "status accounting on the reviewed subset"),
        ("missingness", _cmd_analyze_missingness, "missing-component profiles"),
        ("pairs", _cmd_analyze_pairs, "paired per-patient index export"),
        ("regress", _cmd_analyze_regress, "engagement-on-index logistic regression"),
    ]:
        q = analyze_sub.add_parser(name, help=extra)
        q.add_argument("--cohort", required=True, help="cohort directory")
        q.add_argument("--catalog", help="catalog file (default: bundled demo catalog)")
        q.add_argument("--thresholds", help="threshold CSV (default: bundled)")
        q.add_argument("--roadmap", action="append",
                       help="NAME=PATH roadmap source (repeatable; default original)")
        q.add_argument("--include-proposed", action="store_true",
                       help="promote proposed terms before recovery")
        q.add_argument("--out", required=True)
        if name == "pairs":
            q.add_argument("--a", default="ehr", help="first source (default ehr)")
            q.add_argument("--b", help="second source (default: first roadmap)")
        q.set_defaults(handler=handler)

    p = sub.add_parser("pipeline", help="run the end-to-end pipeline")
    pipeline_sub = p.add_subparsers(dest="pipeline_command", required=True)
    p = pipeline_sub.add_parser("run", help="run all stages from a JSON config")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.set_defaults(handler=_cmd_pipeline_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.log_json)
    try:
        return args.handler(args)
    except _StageFailure as failure:
        print(f"error: {failure}", file=sys.stderr)
        return 3
    except AliRecoverError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
