"""Four-operation calculator over exact rationals."""

from __future__ import annotations

import re
from fractions import Fraction

_TOKEN_RE = re.compile(r"\s*(?:(\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d*)?|\.\d+)|(.))")


class CalcSyntaxError(ValueError):
    pass


def _tokenize(expr: str) -> list[Fraction | str]:
    out: list[Fraction | str] = []
    pos = 0
    expr = expr.rstrip()
    while pos < len(expr):
        m = _TOKEN_RE.match(expr, pos)
        if m is None:  # trailing whitespace only
            break
        pos = m.end()
        num, op = m.groups()
        if num is not None:
            out.append(Fraction(num.replace(",", "")))
        elif op in "+-*/()":
            out.append(op)
        else:
            raise CalcSyntaxError(f"unexpected character {op!r}")
    return out


class _Parser:
    # expr := term (('+'|'-') term)* ; term := unary (('*'|'/') unary)*
    # unary := ('+'|'-') unary | atom ; atom := NUMBER | '(' expr ')'

    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def parse(self) -> Fraction:
        if not self.tokens:
            raise CalcSyntaxError("empty expression")
        value = self.expr()
        if self.i != len(self.tokens):
            raise CalcSyntaxError(f"unexpected {self.peek()!r}")
        return value

    def expr(self) -> Fraction:
        value = self.term()
        while self.peek() in ("+", "-"):
            if self.take() == "+":
                value += self.term()
            else:
                value -= self.term()
        return value

    def term(self) -> Fraction:
        value = self.unary()
        while self.peek() in ("*", "/"):
            if self.take() == "*":
                value *= self.unary()
            else:
                rhs = self.unary()
                if rhs == 0:
                    raise ZeroDivisionError
                value /= rhs
        return value

    def unary(self) -> Fraction:
        t = self.peek()
        if t == "-":
            self.take()
            return -self.unary()
        if t == "+":
            self.take()
            return self.unary()
        return self.atom()

    def atom(self) -> Fraction:
        t = self.take()
        if isinstance(t, Fraction):
            return t
        if t == "(":
            value = self.expr()
            if self.take() != ")":
                raise CalcSyntaxError("unbalanced parenthesis")
            return value
        raise CalcSyntaxError(f"unexpected {t!r}")


def evaluate(expr: str) -> Fraction:
    """Exact value of ``expr``; raises on bad syntax or division by zero."""
    return _Parser(_tokenize(expr)).parse()


def format_result(value: Fraction) -> str:
    """Integers print bare; anything else rounds half away from zero to two decimals."""
    if value.denominator == 1:
        return str(value.numerator)
    # quantize the exact rational, never through binary floats
    scaled = abs(value) * 100
    q, r = divmod(scaled.numerator, scaled.denominator)
    if 2 * r >= scaled.denominator:
        q += 1
    sign = "-" if value < 0 and q else ""
    return f"{sign}{q // 100}.{q % 100:02d}"


def calc_eval(expr: str) -> str | None:
    """Calculator tool: rendered result, or ``None`` for anything it cannot evaluate."""
    try:
        return format_result(evaluate(expr))
    except (CalcSyntaxError, ZeroDivisionError):
        return None
    except RecursionError:
        return None
