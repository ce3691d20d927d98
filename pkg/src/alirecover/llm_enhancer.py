"""LLM-driven roadmap expansion with replayable transcripts.

Issues the term-generation prompt N times against a chat-completion endpoint
(baseline: component names and unhealthy-direction guidance only; context:
additionally embeds each component's existing search terms as examples),
parses a structured response block from each run, and unions the runs into a
proposed-status roadmap. Every run is archived as a transcript so the whole
procedure replays offline, byte for byte, without network access.
"""

from __future__ import annotations

import json
import os
import re
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (
    AllRunsUnparseable,
    EndpointUnreachable,
    InvalidConfig,
    MissingOriginalRoadmap,
)
from .icd_catalog import Catalog, tokenize
from .matcher import match_term
from .phenotype import Threshold, load_thresholds
from .roadmap import (
    AliComponent,
    DISPLAY_NAMES,
    Provenance,
    Roadmap,
    SearchTerm,
    TermStatus,
)

_FENCED_BLOCK = re.compile(r"```terms\s*\n(.*?)```", re.DOTALL | re.IGNORECASE)
_ANY_FENCED = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_ACRONYM = re.compile(r"^[A-Z]{2,6}$")

MODE_BASELINE = "baseline"
MODE_CONTEXT = "context"

_MODE_PROVENANCE = {
    MODE_BASELINE: Provenance.LLM_BASELINE,
    MODE_CONTEXT: Provenance.LLM_CONTEXT,
}


@dataclass(frozen=True)
class LlmRunConfig:
    mode: str
    endpoint: str = ""
    model: str = ""
    api_key: str = ""
    iterations: int = 20
    temperature: float = 1.0
    timeout: float = 60.0
    retries: int = 3
    min_interval: float = 0.0
    transcript_dir: str | Path | None = None
    replay_dir: str | Path | None = None

    def __post_init__(self) -> None:
        if self.mode not in _MODE_PROVENANCE:
            raise InvalidConfig(f"mode must be baseline or context, got {self.mode!r}")
        if self.iterations < 1:
            raise InvalidConfig("iterations must be at least 1")
        if self.replay_dir is None and not self.endpoint:
            raise InvalidConfig("either an endpoint or a replay directory is required")

    @classmethod
    def from_env(cls, mode: str, **overrides) -> "LlmRunConfig":
        return cls(
            mode=mode,
            endpoint=overrides.pop("endpoint", os.environ.get("LLM_ENDPOINT", "")),
            model=overrides.pop("model", os.environ.get("LLM_MODEL", "")),
            api_key=overrides.pop("api_key", os.environ.get("LLM_API_KEY", "")),
            **overrides,
        )


@dataclass(frozen=True)
class LlmTranscript:
    """Archived record of one run: request in, raw text out, what we parsed."""

    run_index: int
    request: dict
    response_text: str
    parsed: dict[str, list[str]]
    diagnostics: tuple[str, ...] = ()


@dataclass
class EnhancementResult:
    roadmap: Roadmap
    transcripts: list[LlmTranscript]
    failed_runs: int = 0
    diagnostics: list[str] = field(default_factory=list)


def _direction_phrase(threshold: Threshold) -> str:
    if threshold.comparator in ("gt", "ge"):
        return "high values are flagged unhealthy"
    return "low values are flagged unhealthy"


def build_prompt(
    mode: str,
    original_roadmap: Roadmap | None = None,
    run_index: int | None = None,
    iterations: int | None = None,
    thresholds: Mapping[AliComponent, Threshold] | None = None,
) -> str:
    """Compose the term-generation prompt for one run.

    Context mode embeds each component's existing retained search terms as
    inline examples and requires them to be carried into the answer; baseline
    mode names the components and their unhealthy direction, nothing more.
    """
    if mode not in _MODE_PROVENANCE:
        raise InvalidConfig(f"mode must be baseline or context, got {mode!r}")
    if mode == MODE_CONTEXT and original_roadmap is None:
        raise MissingOriginalRoadmap("context mode requires the existing roadmap")
    if thresholds is None:
        thresholds = load_thresholds()

    lines = [
        "You are compiling auxiliary-diagnosis search terms for the ten",
        "components of the allostatic load index.",
        "",
        "The biomarkers are:",
    ]
    for component in AliComponent:
        entry = f"- {DISPLAY_NAMES[component]} ({_direction_phrase(thresholds[component])})"
        if mode == MODE_CONTEXT:
            assert original_roadmap is not None
            examples = [
                t.phrase
                for t in original_roadmap.terms_for(component)
                if t.status is TermStatus.RETAINED
            ]
            if examples:
                entry += f" (e.g., {'; '.join(examples)})"
        lines.append(entry)
    lines.append("")
    lines.append(
        "Please propose an exhaustive list of terms (avoiding acronyms) that "
        "will be used to search ICD descriptions to identify each of the "
        "missing biomarkers."
    )
    if mode == MODE_CONTEXT:
        lines.append(
            "Each time you repeat this, be sure to include the examples given "
            "in (e.g.,) and make as exhaustive a list as possible. These "
            "lists can vary."
        )
    else:
        lines.append(
            "Each time you repeat this, be sure to make as exhaustive a list "
            "as possible. These lists can vary."
        )
    lines.extend([
        "",
        "Respond with exactly one fenced code block labelled terms, holding",
        "one line per biomarker in the form",
        "`Component Name: term; term; term`:",
        "",
        "```terms",
        f"{DISPLAY_NAMES[AliComponent.SYSTOLIC_BP]}: first term; second term",
        "```",
    ])
    if run_index is not None and iterations is not None:
        lines.append("")
        lines.append(f"This is repetition {run_index + 1} of {iterations}.")
    return "\n".join(lines)


def parse_response(text: str) -> tuple[dict[str, list[str]], list[str]]:
    """Extract per-component phrase lists from a response.

    Lenient on purpose: prefers the labelled ```terms fence, falls back to any
    fenced block, then to the whole text. Unparseable lines become diagnostics
    instead of errors; single-word all-caps phrases are flagged as
    acronym-like but kept for adjudication.
    """
    diagnostics: list[str] = []
    match = _FENCED_BLOCK.search(text)
    if match is None:
        match = _ANY_FENCED.search(text)
        if match is not None:
            diagnostics.append("no ```terms fence; used first fenced block")
    body = match.group(1) if match is not None else text
    if match is None:
        diagnostics.append("no fenced block; scanned whole response")

    parsed: dict[str, list[str]] = {}
    seen: set[tuple[str, tuple[str, ...]]] = set()
    for raw_line in body.splitlines():
        line = raw_line.strip().lstrip("-*").strip()
        if not line or ":" not in line:
            continue
        head, _, tail = line.partition(":")
        try:
            component = AliComponent.parse(head)
        except Exception:
            diagnostics.append(f"unrecognized component line: {line[:60]!r}")
            continue
        for raw_phrase in tail.split(";"):
            phrase = raw_phrase.strip().strip(".")
            if not phrase:
                continue
            words = tuple(tokenize(phrase))
            if not words:
                diagnostics.append(f"{component.value}: unusable phrase {phrase!r}")
                continue
            key = (component.value, words)
            if key in seen:
                continue
            seen.add(key)
            if _ACRONYM.match(phrase):
                diagnostics.append(f"{component.value}: acronym-like phrase {phrase!r}")
            parsed.setdefault(component.value, []).append(phrase)
    return parsed, diagnostics


def union_runs(
    parsed_runs: Sequence[Mapping[str, Sequence[str]]],
    provenance: Provenance,
    name: str,
) -> Roadmap:
    """Union parsed runs into one proposed-status roadmap.

    Terms are identified by (component, word set); phrases are canonicalized
    to their joined word form so the result is independent of run order.
    """
    terms: dict[tuple[str, tuple[str, ...]], SearchTerm] = {}
    for run in parsed_runs:
        for component_name, phrases in run.items():
            component = AliComponent.parse(component_name)
            for phrase in phrases:
                words = tuple(tokenize(phrase))
                if not words:
                    continue
                key = (component.value, words)
                if key not in terms:
                    terms[key] = SearchTerm.create(
                        component=component,
                        phrase=" ".join(words),
                        provenance=provenance,
                        status=TermStatus.PROPOSED,
                    )
    ordered = sorted(terms.values(), key=lambda t: (t.component.value, t.words))
    return Roadmap(name=name, terms=ordered)


def _extract_text(payload: dict) -> str:
    # accept the common chat-completion response shapes
    try:
        return payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        pass
    try:
        parts = payload["candidates"][0]["content"]["parts"]
        return "".join(p.get("text", "") for p in parts)
    except (KeyError, IndexError, TypeError):
        pass
    content = payload.get("content")
    if isinstance(content, list):
        return "".join(
            block.get("text", "") for block in content if isinstance(block, dict)
        )
    if isinstance(content, str):
        return content
    if isinstance(payload.get("text"), str):
        return payload["text"]
    raise ValueError("no recognizable text field in endpoint response")


def _call_endpoint(config: LlmRunConfig, prompt: str) -> tuple[dict, str]:
    request_body = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
    }
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    last_error: Exception | None = None
    for attempt in range(config.retries + 1):
        try:
            response = requests.post(
                config.endpoint,
                json=request_body,
                headers=headers,
                timeout=config.timeout,
            )
            response.raise_for_status()
            return request_body, _extract_text(response.json())
        except Exception as exc:
            last_error = exc
            if attempt < config.retries:
                time.sleep(min(2.0 ** attempt, 10.0))
    raise EndpointUnreachable(
        f"{config.endpoint}: {last_error}"
    ) from last_error


def transcript_path(directory: str | Path, run_index: int) -> Path:
    return Path(directory) / f"run_{run_index:02d}.json"


def save_transcript(directory: str | Path, transcript: LlmTranscript) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = transcript_path(directory, transcript.run_index)
    payload = {
        "run_index": transcript.run_index,
        "request": transcript.request,
        "response_text": transcript.response_text,
        "parsed": transcript.parsed,
        "diagnostics": list(transcript.diagnostics),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_transcripts(directory: str | Path) -> list[LlmTranscript]:
    directory = Path(directory)
    transcripts = []
    for path in sorted(directory.glob("run_*.json")):
        payload = json.loads(path.read_text(encoding="utf-8"))
        transcripts.append(LlmTranscript(
            run_index=int(payload["run_index"]),
            request=payload.get("request", {}),
            response_text=payload["response_text"],
            parsed={k: list(v) for k, v in payload.get("parsed", {}).items()},
            diagnostics=tuple(payload.get("diagnostics", ())),
        ))
    transcripts.sort(key=lambda t: t.run_index)
    return transcripts


def run_enhancement(
    config: LlmRunConfig,
    original_roadmap: Roadmap | None = None,
    catalog: Catalog | None = None,
) -> EnhancementResult:
    """Run (or replay) the enhancement and union the runs into a roadmap.

    Replay mode re-parses archived response text so the parser, not the
    archive, remains the source of truth. Runs that parse to nothing count as
    failures; if every run fails, that is an error rather than an empty
    roadmap. When a catalog is supplied, per-run matched-code counts are
    added to the result diagnostics.
    """
    if config.mode == MODE_CONTEXT and original_roadmap is None:
        raise MissingOriginalRoadmap("context mode requires the existing roadmap")

    transcripts: list[LlmTranscript] = []
    if config.replay_dir is not None:
        archived = load_transcripts(config.replay_dir)
        if not archived:
            raise EndpointUnreachable(
                f"replay directory {config.replay_dir} has no transcripts"
            )
        for old in archived[: config.iterations]:
            parsed, diagnostics = parse_response(old.response_text)
            transcripts.append(LlmTranscript(
                run_index=old.run_index,
                request=old.request,
                response_text=old.response_text,
                parsed=parsed,
                diagnostics=tuple(diagnostics),
            ))
    else:
        last_sent = 0.0
        for run_index in range(config.iterations):
            if config.min_interval > 0:
                wait = last_sent + config.min_interval - time.monotonic()
                if wait > 0:
                    time.sleep(wait)
            prompt = build_prompt(
                config.mode,
                original_roadmap=original_roadmap,
                run_index=run_index,
                iterations=config.iterations,
            )
            request_body, text = _call_endpoint(config, prompt)
            last_sent = time.monotonic()
            parsed, diagnostics = parse_response(text)
            transcripts.append(LlmTranscript(
                run_index=run_index,
                request=request_body,
                response_text=text,
                parsed=parsed,
                diagnostics=tuple(diagnostics),
            ))

    if config.transcript_dir is not None:
        for transcript in transcripts:
            save_transcript(config.transcript_dir, transcript)

    failed = sum(1 for t in transcripts if not t.parsed)
    if failed == len(transcripts):
        raise AllRunsUnparseable(
            f"none of the {len(transcripts)} runs produced any terms"
        )

    provenance = _MODE_PROVENANCE[config.mode]
    roadmap = union_runs(
        [t.parsed for t in transcripts],
        provenance,
        name=f"llm_{config.mode}",
    )
    result = EnhancementResult(
        roadmap=roadmap,
        transcripts=transcripts,
        failed_runs=failed,
    )
    for transcript in transcripts:
        if not transcript.parsed:
            result.diagnostics.append(f"run {transcript.run_index}: no terms parsed")
    if catalog is not None:
        for transcript in transcripts:
            codes: set[str] = set()
            for component_name, phrases in transcript.parsed.items():
                component = AliComponent.parse(component_name)
                for phrase in phrases:
                    term = SearchTerm.create(
                        component=component,
                        phrase=phrase,
                        provenance=provenance,
                        status=TermStatus.PROPOSED,
                    )
                    codes |= match_term(term, catalog)
            result.diagnostics.append(
                f"run {transcript.run_index}: matched {len(codes)} catalog codes"
            )
    return result
