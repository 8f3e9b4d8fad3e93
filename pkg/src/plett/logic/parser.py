"""Recursive-descent parser for the property grammar.

    formula     := disjunct ( '||' disjunct )*
    disjunct    := unary ( '&&' unary )*
    unary       := '!' unary | '(' formula ')' | comparison
    comparison  := affine ( '>' | '<' ) affine annotation*
    affine      := [ '+' | '-' ] term ( ( '+' | '-' ) term )*
    term        := NUMBER [ '*' IDENT ] | IDENT [ '*' NUMBER ]
    annotation  := '@rhomax' '(' NUMBER ')'
                 | '@signals' '(' [ IDENT ( ',' IDENT )* ] ')'
                 | '@id' '(' IDENT ')'

``&&`` binds tighter than ``||``; both associate to the left. Negations are
pushed into the atoms, so the returned tree only has atoms, ``And`` and ``Or``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .formula import And, Comparator, Formula, LinearAtom, Not, Or, to_nnf

__all__ = ["ParseError", "parse"]


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<annot>@[A-Za-z_]+)
  | (?P<op>\|\||&&|[!()<>+\-*,])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        else:
            for i, ch in enumerate(m.group()):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text, states, rho_max):
        self.tokens = _tokenize(text)
        self.i = 0
        self.states = None if states is None else set(states)
        self.rho_max = rho_max

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().text == text and self.peek().kind in ("op", "annot"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok)
        return self.advance()

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def formula(self) -> Formula:
        node = self.conjunction()
        while self.accept("||"):
            node = Or(node, self.conjunction())
        return node

    def conjunction(self) -> Formula:
        node = self.unary()
        while self.accept("&&"):
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        if self.accept("!"):
            return Not(self.unary())
        if self.accept("("):
            node = self.formula()
            self.expect(")")
            return node
        return self.comparison()

    def comparison(self) -> LinearAtom:
        start = self.peek()
        lhs, lhs_const = self.affine()
        tok = self.peek()
        if tok.text not in (">", "<"):
            self.error(f"expected '>' or '<', found {tok.text or 'end of input'!r}")
        self.advance()
        comparator = Comparator(tok.text)
        rhs, rhs_const = self.affine()
        coef = dict(lhs)
        for state, c in rhs.items():
            coef[state] = coef.get(state, 0.0) - c

        rho_max, signals, name = None, frozenset(), None
        while self.peek().kind == "annot":
            ann = self.advance()
            if ann.text == "@rhomax":
                self.expect("(")
                rho_max = self.number()
                self.expect(")")
            elif ann.text == "@signals":
                self.expect("(")
                names = []
                if self.peek().kind == "ident":
                    names.append(self.advance().text)
                    while self.accept(","):
                        names.append(self.ident())
                self.expect(")")
                signals = frozenset(names)
            elif ann.text == "@id":
                self.expect("(")
                name = self.ident()
                self.expect(")")
            else:
                self.error(f"unknown annotation {ann.text!r}", ann)
        if rho_max is None:
            rho_max = self.rho_max
        if rho_max is None:
            self.error("atom has no @rhomax declaration", start)
        if rho_max <= 0:
            self.error(f"rho_max must be positive, got {rho_max}", start)
        return LinearAtom(tuple(coef.items()), rhs_const, comparator, lhs_const,
                          rho_max, signals, name)

    def affine(self) -> tuple[dict[str, float], float]:
        coef: dict[str, float] = {}
        const = 0.0
        sign = 1.0
        if self.accept("-"):
            sign = -1.0
        else:
            self.accept("+")
        while True:
            state, value = self.term()
            if state is None:
                const += sign * value
            else:
                coef[state] = coef.get(state, 0.0) + sign * value
            if self.accept("+"):
                sign = 1.0
            elif self.accept("-"):
                sign = -1.0
            else:
                return coef, const

    def term(self) -> tuple[str | None, float]:
        tok = self.peek()
        if tok.kind == "number":
            value = self.number()
            if self.accept("*"):
                return self.state(), value
            return None, value
        if tok.kind == "ident":
            state = self.state()
            if self.accept("*"):
                return state, self.number()
            return state, 1.0
        self.error(f"expected a number or state name, found {tok.text or 'end of input'!r}")

    def state(self) -> str:
        tok = self.peek()
        name = self.ident()
        if self.states is not None and name not in self.states:
            self.error(f"unknown state {name!r}", tok)
        return name

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind != "ident":
            self.error(f"expected a name, found {tok.text or 'end of input'!r}")
        return self.advance().text

    def number(self) -> float:
        negative = self.accept("-")
        tok = self.peek()
        if tok.kind != "number":
            self.error(f"expected a number, found {tok.text or 'end of input'!r}")
        self.advance()
        value = float(tok.text)
        return -value if negative else value


def parse(text: str, *, states: Iterable[str] | None = None,
          rho_max: float | None = None) -> Formula:
    """Parse a property into negation normal form.

    ``states`` restricts the allowed state names; ``rho_max`` is used for atoms
    without an ``@rhomax`` annotation (otherwise such atoms are an error).
    """
    p = _Parser(text, states, rho_max)
    node = p.formula()
    if p.peek().kind != "eof":
        p.error(f"unexpected {p.peek().text!r}")
    return to_nnf(node)
