"""Exact rational-function field per chart and the problem-file expression grammar.

Grammar (whitespace-insensitive)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" integer)?
    atom   := integer | name | "(" expr ")"

Rational literals are written as divisions (``3/2``). Exponents are
non-negative integer literals.
"""

from __future__ import annotations

import functools
import re
from typing import Any

import sympy
from sympy import QQ
from sympy.polys.fields import field

from schouten_lab.errors import ParseError, UnknownCoordinate

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\S))")


@functools.lru_cache(maxsize=None)
def rational_field(names: tuple[str, ...]) -> tuple[Any, tuple[Any, ...]]:
    """Return ``(K, gens)``: the field QQ(names) and its generators."""
    K, *gens = field([sympy.Symbol(name) for name in names], QQ)
    return K, tuple(gens)


class _Parser:
    def __init__(self, text: str, names: tuple[str, ...]) -> None:
        self.text = text
        self.K, gens = rational_field(names)
        self.lookup = dict(zip(names, gens, strict=True))
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        stripped_end = len(text.rstrip())
        while pos < stripped_end:
            m = _TOKEN.match(text, pos)
            if m is None:  # pragma: no cover - the pattern matches any non-space
                raise ParseError("unreadable input", col=pos + 1)
            number, name, op = m.groups()
            start = m.start(m.lastindex or 0)
            if number is not None:
                self.tokens.append(("int", number, start))
            elif name is not None:
                self.tokens.append(("name", name, start))
            else:
                if op not in "+-*/^()":
                    raise ParseError(f"unexpected character {op!r}", col=start + 1)
                self.tokens.append(("op", op, start))
            pos = m.end()
        self.index = 0

    def _peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def _take(self) -> tuple[str, str, int]:
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of expression", col=len(self.text) + 1)
        self.index += 1
        return tok

    def parse(self) -> Any:
        if not self.tokens:
            raise ParseError("empty expression")
        value = self._expr()
        tok = self._peek()
        if tok is not None:
            raise ParseError(f"unexpected token {tok[1]!r}", col=tok[2] + 1)
        return value

    def _expr(self) -> Any:
        value = self._term()
        while (tok := self._peek()) is not None and tok[1] in "+-" and tok[0] == "op":
            self._take()
            rhs = self._term()
            value = value + rhs if tok[1] == "+" else value - rhs
        return value

    def _term(self) -> Any:
        value = self._unary()
        while (tok := self._peek()) is not None and tok[1] in "*/" and tok[0] == "op":
            self._take()
            rhs = self._unary()
            if tok[1] == "*":
                value = value * rhs
            else:
                if not rhs:
                    raise ParseError("division by zero", col=tok[2] + 1)
                value = value / rhs
        return value

    def _unary(self) -> Any:
        tok = self._peek()
        if tok is not None and tok[0] == "op" and tok[1] in "+-":
            self._take()
            value = self._unary()
            return -value if tok[1] == "-" else value
        return self._power()

    def _power(self) -> Any:
        base = self._atom()
        tok = self._peek()
        if tok is not None and tok == ("op", "^", tok[2]):
            self._take()
            exp_tok = self._take()
            if exp_tok[0] != "int":
                raise ParseError("exponent must be a non-negative integer", col=exp_tok[2] + 1)
            return base ** int(exp_tok[1])
        return base

    def _atom(self) -> Any:
        kind, text, col = self._take()
        if kind == "int":
            return self.K(int(text))
        if kind == "name":
            if text not in self.lookup:
                raise UnknownCoordinate(f"unknown coordinate {text!r}", col=col + 1)
            return self.lookup[text]
        if text == "(":
            value = self._expr()
            closing = self._take()
            if closing[1] != ")":
                raise ParseError("expected ')'", col=closing[2] + 1)
            return value
        raise ParseError(f"unexpected token {text!r}", col=col + 1)


def parse_rational(text: str, names: tuple[str, ...]) -> Any:
    """Parse ``text`` into an element of ``QQ(names)``.

    Raises:
        ParseError: on malformed input, with the 1-based column.
        UnknownCoordinate: if a name is not one of ``names``.
    """
    return _Parser(text, names).parse()


def format_rational(value: Any) -> str:
    """Render a field element in the grammar accepted by :func:`parse_rational`."""
    return str(sympy.sstr(value.as_expr())).replace("**", "^")
