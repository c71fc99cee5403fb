"""Three-part model formulas.

A formula such as ``mode ~ price | income | catch`` assigns every
right-hand-side variable one of three coefficient types:

* part 1: alternative-varying data with a generic coefficient (alpha)
* part 2: individual-specific data with alternative-specific coefficients (beta)
* part 3: alternative-varying data with alternative-specific coefficients (gamma)

Grammar::

    formula  := ident "~" part ("|" part){0,2}
    part     := ["-"] term (("+" | "-") term)*
    term     := ident | "1" | "0"
    ident    := [A-Za-z_][A-Za-z0-9_.]*

``1`` is a placeholder, ``0`` or ``- 1`` anywhere removes the intercept.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import FormulaError

__all__ = ["ModelFormula", "parse_formula", "format_formula"]

_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_.]*)|(\d+(?:\.\d*)?)|(.))")


@dataclass(frozen=True)
class ModelFormula:
    response: str
    generic_vars: tuple[str, ...] = ()
    individual_vars: tuple[str, ...] = ()
    altspecific_vars: tuple[str, ...] = ()
    intercept: bool = True

    def __post_init__(self):
        for name in ("generic_vars", "individual_vars", "altspecific_vars"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        seen = set()
        for v in self.variables:
            if v in seen:
                raise FormulaError(f"variable {v!r} appears more than once")
            seen.add(v)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.generic_vars + self.individual_vars + self.altspecific_vars

    def __str__(self):
        return format_formula(self)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            tokens.append(("ident", m.group(1), start))
        elif m.group(2) is not None:
            tokens.append(("number", m.group(2), start))
        else:
            tokens.append(("op", m.group(3), start))
        pos = m.end()
        if text[pos:].strip() == "":
            break
    return tokens


def _parse_part(tokens, part_no):
    """Return (variables, intercept_removed) for one ``|``-separated part."""
    if not tokens:
        raise FormulaError(f"part {part_no} is empty")
    variables = []
    removed = False
    sign = "+"
    expect_term = True
    for i, (kind, tok, pos) in enumerate(tokens):
        if expect_term:
            if kind == "op":
                if tok == "-" and i == 0:
                    sign = "-"
                    continue
                raise FormulaError("expected a variable name", tok, pos)
            if kind == "number":
                if tok not in ("0", "1"):
                    raise FormulaError("only the constants 0 and 1 are allowed", tok, pos)
                if tok == "0" or sign == "-":
                    removed = True
            elif sign == "-":
                raise FormulaError("only '- 1' may follow a minus sign", tok, pos)
            else:
                if tok in variables:
                    raise FormulaError("duplicate variable", tok, pos)
                variables.append(tok)
            expect_term = False
        else:
            if kind != "op" or tok not in "+-":
                raise FormulaError("expected '+' or '-'", tok, pos)
            sign = tok
            expect_term = True
    if expect_term:
        kind, tok, pos = tokens[-1]
        raise FormulaError("empty variable token", tok, pos)
    return variables, removed


def parse_formula(text: str) -> ModelFormula:
    """Parse a three-part formula string.

    Missing trailing parts are empty; ``1`` stands for an empty part.

    >>> parse_formula("mode ~ price | income - 1 | catch").intercept
    False
    """
    tokens = _tokenize(text)
    tildes = [t for t in tokens if t[0] == "op" and t[1] == "~"]
    if not tildes:
        raise FormulaError("formula needs a '~'", text.strip(), 0)
    if len(tildes) > 1:
        raise FormulaError("formula needs exactly one '~'", "~", tildes[1][2])
    split = tokens.index(tildes[0])
    lhs, rhs = tokens[:split], tokens[split + 1:]
    if len(lhs) != 1 or lhs[0][0] != "ident":
        tok = lhs[0] if lhs else ("op", "~", tildes[0][2])
        raise FormulaError("response must be a single variable name", tok[1], tok[2])

    parts = [[]]
    for tok in rhs:
        if tok[0] == "op" and tok[1] == "|":
            parts.append([])
            if len(parts) > 3:
                raise FormulaError("at most three parts are allowed", "|", tok[2])
        else:
            parts[-1].append(tok)

    lists = []
    intercept = True
    for i, part in enumerate(parts, start=1):
        if not part:
            bar = [t for t in rhs if t[1] == "|"]
            pos = bar[min(i - 1, len(bar) - 1)][2] if bar else tildes[0][2]
            raise FormulaError(f"part {i} is empty", "|", pos)
        names, removed = _parse_part(part, i)
        intercept = intercept and not removed
        lists.append(names)
    while len(lists) < 3:
        lists.append([])

    seen = {}
    for i, names in enumerate(lists, start=1):
        for v in names:
            if v in seen:
                pos = next(t[2] for t in parts[i - 1] if t[1] == v)
                raise FormulaError(f"variable also used in part {seen[v]}", v, pos)
            seen[v] = i
    return ModelFormula(lhs[0][1], tuple(lists[0]), tuple(lists[1]), tuple(lists[2]), intercept)


def format_formula(f: ModelFormula) -> str:
    """Canonical text for ``f``; ``parse_formula(format_formula(f)) == f``."""

    def part(names):
        return " + ".join(names) if names else "1"

    middle = part(f.individual_vars)
    if not f.intercept:
        middle = f"{middle} - 1" if f.individual_vars else "-1"
    return f"{f.response} ~ {part(f.generic_vars)} | {middle} | {part(f.altspecific_vars)}"
