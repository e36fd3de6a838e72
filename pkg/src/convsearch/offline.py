"""Deterministic offline stand-in for a chat-completion endpoint.

Real model access is a pluggable seam; tests, demos, and fixture caches
need responses that are reproducible byte for byte.  The scripted
transport inspects the rendered prompt, recognizes which task it belongs
to (query generation, grounded answering, or statement classification),
and produces a plausible response as a pure function of the prompt text.
"""

from __future__ import annotations

import re

from .llm import DecodingConfig

__all__ = ["scripted_response", "ScriptedTransport"]

_WORD_RE = re.compile(r"[A-Za-z0-9]+")
_BUDGET_RE = re.compile(r"don't generate more than (\d+) queries")
_STATEMENT_RE = re.compile(r"^(\d+)\.\s+(.*)$")

_STOPWORDS = frozenset(
    "a an and are as at be but by for from how i in is it my of on or that the "
    "this to was we what when which who will with you your".split()
)


def _content_words(text: str) -> list[str]:
    seen: list[str] = []
    for word in _WORD_RE.findall(text.lower()):
        if len(word) < 3 or word.isdigit():
            continue
        if word not in _STOPWORDS and word not in seen:
            seen.append(word)
    return seen


def _field(prompt: str, label: str) -> str:
    """Extract the single-line value following ``label`` in the prompt."""
    marker = f"{label}: "
    start = prompt.find(marker)
    if start < 0:
        return ""
    start += len(marker)
    end = prompt.find("\n", start)
    return prompt[start:] if end < 0 else prompt[start:end]


def _block(prompt: str, start_label: str, end_label: str) -> str:
    """Extract the (possibly multi-line) text between two labels."""
    marker = f"{start_label}: "
    start = prompt.find(marker)
    if start < 0:
        return ""
    start += len(marker)
    end = prompt.find(f"\n{end_label}:", start)
    return prompt[start:] if end < 0 else prompt[start:end]


def _query_generation(prompt: str) -> str:
    budget_match = _BUDGET_RE.search(prompt)
    budget = int(budget_match.group(1)) if budget_match else 1
    utterance = _field(prompt, "# User question")
    ptkb_words = _content_words(_block(prompt, "# Background knowledge", "# Context"))
    queries = [utterance.strip() or "information request"]
    for word in ptkb_words:
        if len(queries) >= budget:
            break
        if word in queries[0].lower():
            continue
        queries.append(f"{queries[0]} {word}")
    return "\n".join(f"{i}. {q}" for i, q in enumerate(queries[:budget], start=1))


def _grounded_answer(prompt: str) -> str:
    utterance = _field(prompt, "# User query")
    doc_words = _content_words(_field(prompt, "# Doc1"))[:12]
    summary = " ".join(doc_words) if doc_words else "the retrieved material"
    return (
        f"Regarding \"{utterance.strip()}\": the most relevant passage covers "
        f"{summary}. The remaining retrieved passages add supporting detail."
    )


def _classification(prompt: str) -> str:
    question_words = set(_content_words(_field(prompt, "# User question")))
    copied: list[str] = []
    in_ptkb = False
    for line in prompt.splitlines():
        if line.startswith("Here is the background information about the user:"):
            in_ptkb = True
            remainder = line.split(":", 1)[1].strip()
            match = _STATEMENT_RE.match(remainder)
            if match and set(_content_words(match.group(2))) & question_words:
                copied.append(match.group(2))
            continue
        if not in_ptkb:
            continue
        match = _STATEMENT_RE.match(line)
        if match is None:
            in_ptkb = False
            continue
        if set(_content_words(match.group(2))) & question_words:
            copied.append(match.group(2))
    return "\n".join(copied) if copied else "None"


def scripted_response(prompt: str) -> str:
    """Produce a deterministic response for any of the three prompt shapes."""
    if "# Generated queries:" in prompt:
        return _query_generation(prompt)
    if prompt.startswith("# Doc1:"):
        return _grounded_answer(prompt)
    return _classification(prompt)


class ScriptedTransport:
    """Transport-compatible wrapper around :func:`scripted_response`.

    Counts calls so cache-behaviour tests can assert how often the
    "network" was hit.
    """

    def __init__(self) -> None:
        self.calls = 0

    def __call__(self, model_id: str, prompt: str, decoding: DecodingConfig) -> str:
        self.calls += 1
        return scripted_response(prompt)
