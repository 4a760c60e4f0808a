"""Turning free-form model text into a mode-valid decision."""

from __future__ import annotations

import re

from ..controller import Decision, DecisionSource, DecisionToken, Mode, tokens_for_mode

_ALL_TOKENS = "|".join(t.value for t in DecisionToken)

# Grammar line: 'DECISION: <TOKEN>', case-insensitive, anywhere in the text.
_GRAMMAR_RE = re.compile(rf"decision\s*:\s*({_ALL_TOKENS})\b", re.IGNORECASE)

# Fallback: a bare token. Uppercase only, so ordinary prose about cleaning
# or waiting does not count as a decision.
_BARE_RE = re.compile(rf"\b({_ALL_TOKENS})\b")


class ParseFailure(Exception):
    """No usable decision token in the model output."""


def parse_decision(text: str, mode: Mode) -> Decision:
    """Extract the decision from model output.

    The last 'DECISION: <TOKEN>' occurrence wins; without one, the last
    standalone uppercase token is used. A token outside the mode's
    vocabulary is a parse failure, never a silent remap.
    """
    if not isinstance(text, str) or not text:
        raise ParseFailure("empty model output")
    valid = tokens_for_mode(mode)
    matches = _GRAMMAR_RE.findall(text)
    if matches:
        token = DecisionToken(matches[-1].upper())
        if token not in valid:
            raise ParseFailure(f"token {token.value} invalid for mode {mode.value}")
        return Decision(token, DecisionSource.MODEL)
    bare = _BARE_RE.findall(text)
    if bare:
        token = DecisionToken(bare[-1])
        if token not in valid:
            raise ParseFailure(f"token {token.value} invalid for mode {mode.value}")
        return Decision(token, DecisionSource.MODEL)
    raise ParseFailure("no decision token found")


def render_decision(decision: Decision) -> str:
    return f"DECISION: {decision.token.value}"
