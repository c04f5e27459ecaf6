"""Canonical transcript serialization.

One consultation per file, JSON with sorted keys and a fixed indent, so the
same session always produces byte-identical bytes; these files double as the
golden fixtures for replay tests.  Format details in docs/transcript-format.md.
"""

from __future__ import annotations

import json
from pathlib import Path

from .engine import DialogueState, build_trace
from .errors import ReportError

TRANSCRIPT_FORMAT = "consult-transcript"
TRANSCRIPT_VERSION = 1


def dumps(trace: dict) -> str:
    """Canonical text for a trace dict: sorted keys, two-space indent."""
    return json.dumps(trace, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save(state_or_trace: "DialogueState | dict", path: str | Path) -> Path:
    path = Path(path)
    trace = (
        build_trace(state_or_trace)
        if isinstance(state_or_trace, DialogueState)
        else state_or_trace
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(trace), encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write transcript {path}: {exc}")
    return path


def load(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot read transcript {path}: {exc}")
    try:
        trace = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportError(f"malformed transcript {path}: {exc.msg}")
    if trace.get("format") != TRANSCRIPT_FORMAT:
        raise ReportError(f"not a transcript file: {path}")
    if trace.get("version") != TRANSCRIPT_VERSION:
        raise ReportError(f"unsupported transcript version in {path}")
    return trace
