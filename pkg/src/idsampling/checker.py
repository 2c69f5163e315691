"""Competition-math answer extraction, canonicalization, and equivalence.

Answers are parsed into a canonical form ``sum of (rational coefficient *
sqrt(d))`` with every radicand ``d`` squarefree and terms sorted by
radicand (``d = 1`` carries the rational part). Within this grammar —
integers, rationals, square roots, sums, products, quotients, and integer
powers — canonical equality is a sound and complete equivalence test, so
``1/sqrt(3)``, ``sqrt(3)/3``, and ``\\frac{\\sqrt{3}}{3}`` all reduce to the
identical object.

Anything outside the grammar raises :class:`AnswerParseError`; callers
treat such answers as opaque strings (see :func:`opaque_key` and
:func:`answers_match`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import mpmath

_MAX_RADICAL_PRIMES = 8
_MAX_EXPONENT = 64


class AnswerParseError(ValueError):
    """Text does not belong to the supported answer grammar."""


@dataclass(frozen=True)
class RawAnswer:
    """An extracted final-answer span and where it came from."""

    span: str
    origin: str  # "boxed" | "answer-line" | "none"

    @property
    def found(self) -> bool:
        return self.origin != "none"


NO_ANSWER = RawAnswer(span="", origin="none")


def extract_final_answer(trajectory_text: str) -> RawAnswer:
    """Pull the committed final answer out of a full response text.

    The last ``\\boxed{...}`` occurrence wins (self-correction appends
    revised answers, so the final statement supersedes earlier ones). Boxed
    occurrences with unbalanced braces are skipped rather than raising. If
    no balanced box exists, the expression following the last
    case-insensitive ``answer:`` marker on its line is used.
    """
    if not trajectory_text:
        return NO_ANSWER

    for m in reversed(list(re.finditer(r"\\boxed", trajectory_text))):
        content = _balanced_brace_content(trajectory_text, m.end())
        if content is not None:
            return RawAnswer(span=content.strip(), origin="boxed")

    last = None
    for m in re.finditer(r"answer\s*:\s*", trajectory_text, flags=re.IGNORECASE):
        last = m
    if last is not None:
        end = trajectory_text.find("\n", last.end())
        if end == -1:
            end = len(trajectory_text)
        span = trajectory_text[last.end():end].strip()
        if span:
            return RawAnswer(span=span, origin="answer-line")

    return NO_ANSWER


def _balanced_brace_content(text: str, idx: int) -> str | None:
    """Content of the brace group starting at or after ``idx``; None if the
    group is missing or unbalanced."""
    while idx < len(text) and text[idx].isspace():
        idx += 1
    if idx >= len(text) or text[idx] != "{":
        return None
    depth = 1
    start = idx + 1
    for i in range(start, len(text)):
        c = text[i]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[start:i]
    return None


def opaque_key(text: str) -> str:
    """Whitespace-collapsed identity key for answers outside the grammar."""
    return " ".join(text.split())


# ---------------------------------------------------------------------------
# Canonical expression values
# ---------------------------------------------------------------------------

def _squarefree(n: int) -> tuple[int, int]:
    """Factor ``n = s*s * d`` with ``d`` squarefree; returns ``(s, d)``."""
    if n < 0:
        raise AnswerParseError("negative radicand")
    if n == 0:
        return 0, 1
    s, d = 1, 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            count = 0
            while n % p == 0:
                n //= p
                count += 1
            s *= p ** (count // 2)
            if count % 2:
                d *= p
        p += 1 if p == 2 else 2
    d *= n  # leftover prime
    return s, d


_Terms = dict[int, Fraction]  # radicand -> coefficient


def _tadd(a: _Terms, b: _Terms) -> _Terms:
    out = dict(a)
    for d, c in b.items():
        out[d] = out.get(d, Fraction(0)) + c
        if out[d] == 0:
            del out[d]
    return out


def _tneg(a: _Terms) -> _Terms:
    return {d: -c for d, c in a.items()}


def _tmul(a: _Terms, b: _Terms) -> _Terms:
    out: _Terms = {}
    for d1, c1 in a.items():
        for d2, c2 in b.items():
            s, d = _squarefree(d1 * d2)
            c = c1 * c2 * s
            if c == 0:
                continue
            out[d] = out.get(d, Fraction(0)) + c
            if out[d] == 0:
                del out[d]
    return out


def _tdiv(num: _Terms, den: _Terms) -> _Terms:
    """Exact division by iterated conjugation.

    Multiplying numerator and denominator by the conjugate that flips the
    sign of every term whose radicand is divisible by some prime ``p``
    eliminates ``p`` from the denominator's radicands, so the process
    terminates once the denominator is rational.
    """
    den = {d: c for d, c in den.items() if c != 0}
    if not den:
        raise AnswerParseError("division by zero")
    for _ in range(_MAX_RADICAL_PRIMES):
        if len(den) == 1 and 1 in den:
            inv = {1: 1 / den[1]}
            return _tmul(num, inv)
        p = _smallest_radical_prime(den)
        conj = {d: (-c if d % p == 0 else c) for d, c in den.items()}
        num = _tmul(num, conj)
        den = _tmul(den, conj)
    raise AnswerParseError("radical expression too deep to rationalize")


def _smallest_radical_prime(terms: _Terms) -> int:
    best = None
    for d in terms:
        if d == 1:
            continue
        p = 2
        n = d
        while p * p <= n:
            if n % p == 0:
                n = p
                break
            p += 1 if p == 2 else 2
        cand = n  # d squarefree: smallest factor found, or d itself prime
        if best is None or cand < best:
            best = cand
    assert best is not None  # caller excludes rational-only denominators
    return best


def _tpow(base: _Terms, exp: int) -> _Terms:
    if abs(exp) > _MAX_EXPONENT:
        raise AnswerParseError("exponent too large")
    if exp < 0:
        return _tdiv({1: Fraction(1)}, _tpow(base, -exp))
    out: _Terms = {1: Fraction(1)}
    for _ in range(exp):
        out = _tmul(out, base)
    return out


def _tsqrt(arg: _Terms) -> _Terms:
    """Square root of an expression that reduces to a nonnegative rational."""
    if not arg:
        return {}
    if len(arg) != 1 or 1 not in arg:
        raise AnswerParseError("sqrt argument must reduce to a rational")
    c = arg[1]
    if c < 0:
        raise AnswerParseError("sqrt of a negative value")
    # sqrt(p/q) = sqrt(p*q) / q
    s, d = _squarefree(c.numerator * c.denominator)
    coeff = Fraction(s, c.denominator)
    if coeff == 0:
        return {}
    return {d: coeff}


class AnswerExpr:
    """Canonical value of a parsed answer.

    Immutable and hashable; two answers are mathematically equivalent within
    the grammar iff their ``AnswerExpr`` values compare equal.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: _Terms):
        clean = {d: c for d, c in terms.items() if c != 0}
        object.__setattr__(self, "terms", tuple(sorted(clean.items())))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("AnswerExpr is immutable")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AnswerExpr) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def __repr__(self) -> str:
        return f"AnswerExpr({self.render()!r})"

    @property
    def is_rational(self) -> bool:
        return all(d == 1 for d, _ in self.terms)

    def render(self) -> str:
        """Canonical text form; re-parsing it yields an equal AnswerExpr."""
        if not self.terms:
            return "0"
        parts: list[str] = []
        for d, c in self.terms:
            parts.append(_render_term(d, c, first=not parts))
        return "".join(parts)

    def numeric(self, bits: int = 200) -> mpmath.mpf:
        """High-precision numeric value (``bits`` of working precision)."""
        with mpmath.workprec(bits):
            total = mpmath.mpf(0)
            for d, c in self.terms:
                total += (mpmath.mpf(c.numerator) / c.denominator) * mpmath.sqrt(d)
            return total


def _render_term(d: int, c: Fraction, first: bool) -> str:
    sign = "-" if c < 0 else ("" if first else "+")
    c = abs(c)
    if d == 1:
        body = str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    elif c == 1:
        body = f"sqrt({d})"
    elif c.denominator == 1:
        body = f"{c.numerator}*sqrt({d})"
    else:
        body = f"{c.numerator}/{c.denominator}*sqrt({d})"
    return sign + body


ZERO = AnswerExpr({})


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_STRIP_PATTERNS = (
    "\\left", "\\right", "\\!", "\\,", "\\;", "\\:", "\\ ", "$",
)

_THOUSANDS = re.compile(r"(\d),(\d{3})(?!\d)")
_TEXT_GROUP = re.compile(r"\\(?:text|mathrm|mathbf|mbox)\{([^{}]*)\}")

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>\d+(?:\.\d+)?)"
    r"|(?P<sqrt>\\sqrt|sqrt)"
    r"|(?P<frac>\\frac)"
    r"|(?P<op>[-+*/^(){}])"
    r")"
)


def _normalize(text: str) -> str:
    t = text.strip()
    t = _TEXT_GROUP.sub(r"\1", t)
    for pat in _STRIP_PATTERNS:
        t = t.replace(pat, "")
    t = t.replace("\\dfrac", "\\frac").replace("\\tfrac", "\\frac")
    t = t.replace("\\cdot", "*").replace("\\times", "*").replace("\\div", "/")
    t = t.replace("\u221a", "\\sqrt")
    while _THOUSANDS.search(t):
        t = _THOUSANDS.sub(r"\1\2", t)
    t = t.strip()
    while t and t[-1] in ".,;:":
        t = t[:-1].rstrip()
    return t


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            remainder = text[pos:].strip()
            if not remainder:
                break
            raise AnswerParseError(f"unexpected input at {remainder[:20]!r}")
        if m.group("number") is not None:
            tokens.append(("number", m.group("number")))
        elif m.group("sqrt") is not None:
            tokens.append(("sqrt", "sqrt"))
        elif m.group("frac") is not None:
            tokens.append(("frac", "frac"))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive-descent evaluator over the answer grammar.

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/')? factor)*       (adjacency multiplies)
    factor := ('-'|'+') factor | power
    power  := atom ('^' intexp)?
    atom   := number | sqrt group | frac group group | '(' expr ')' | '{' expr '}'
    """

    def __init__(self, tokens: list[tuple[str, str]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise AnswerParseError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, value: str) -> None:
        tok = self.take()
        if tok != ("op", value):
            raise AnswerParseError(f"expected {value!r}, found {tok[1]!r}")

    def parse(self) -> _Terms:
        if not self.tokens:
            raise AnswerParseError("empty answer")
        value = self.expr()
        if self.peek() is not None:
            raise AnswerParseError(f"trailing input {self.peek()[1]!r}")
        return value

    def expr(self) -> _Terms:
        value = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            value = _tadd(value, rhs if op == "+" else _tneg(rhs))
        return value

    def term(self) -> _Terms:
        value = self.factor()
        while True:
            tok = self.peek()
            if tok in (("op", "*"), ("op", "/")):
                op = self.take()[1]
                rhs = self.factor()
                value = _tmul(value, rhs) if op == "*" else _tdiv(value, rhs)
            elif tok is not None and self._starts_atom(tok):
                value = _tmul(value, self.factor())
            else:
                return value

    @staticmethod
    def _starts_atom(tok: tuple[str, str]) -> bool:
        kind, val = tok
        return kind in ("number", "sqrt", "frac") or (kind == "op" and val in "({")

    def factor(self) -> _Terms:
        tok = self.peek()
        if tok in (("op", "-"), ("op", "+")):
            self.take()
            value = self.factor()
            return _tneg(value) if tok[1] == "-" else value
        return self.power()

    def power(self) -> _Terms:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return _tpow(base, self.int_exponent())
        return base

    def int_exponent(self) -> int:
        tok = self.peek()
        braced = tok == ("op", "{")
        parened = tok == ("op", "(")
        if braced or parened:
            self.take()
        sign = 1
        if self.peek() == ("op", "-"):
            self.take()
            sign = -1
        kind, val = self.take()
        if kind != "number" or "." in val:
            raise AnswerParseError("exponent must be an integer")
        if braced:
            self.expect("}")
        elif parened:
            self.expect(")")
        return sign * int(val)

    def atom(self) -> _Terms:
        kind, val = self.take()
        if kind == "number":
            return {1: Fraction(val)}
        if kind == "sqrt":
            return _tsqrt(self.group())
        if kind == "frac":
            num = self.group()
            den = self.group()
            return _tdiv(num, den)
        if (kind, val) == ("op", "("):
            value = self.expr()
            self.expect(")")
            return value
        if (kind, val) == ("op", "{"):
            value = self.expr()
            self.expect("}")
            return value
        raise AnswerParseError(f"unexpected token {val!r}")

    def group(self) -> _Terms:
        """A braced/parenthesized argument, or a single number token."""
        tok = self.peek()
        if tok == ("op", "{"):
            self.take()
            value = self.expr()
            self.expect("}")
            return value
        if tok == ("op", "("):
            self.take()
            value = self.expr()
            self.expect(")")
            return value
        kind, val = self.take()
        if kind == "number":
            return {1: Fraction(val)}
        raise AnswerParseError(f"expected argument group, found {val!r}")


def parse_expr(text: str) -> AnswerExpr:
    """Parse plain or LaTeX-subset notation into canonical form.

    Raises :class:`AnswerParseError` for anything outside the grammar of
    rationals, square radicals, and their sums/products/quotients/integer
    powers.
    """
    normalized = _normalize(text)
    if not normalized:
        raise AnswerParseError("empty answer")
    return AnswerExpr(_Parser(_tokenize(normalized)).parse())


def try_parse(text: str) -> AnswerExpr | None:
    try:
        return parse_expr(text)
    except AnswerParseError:
        return None


def equivalent(a: AnswerExpr, b: AnswerExpr) -> bool:
    """Mathematical equivalence: identity of canonical forms.

    Sound and complete for expressions inside the grammar; callers holding
    raw text should use :func:`answers_match`, which adds the opaque-string
    and numeric fallbacks for grammar extensions.
    """
    return a == b


def numeric_close(a: float, b: float, rel_tol: float = 1e-12) -> bool:
    return abs(a - b) <= rel_tol * max(1.0, abs(a), abs(b))


def answers_match(a_text: str, b_text: str, rel_tol: float = 1e-12) -> bool:
    """Equivalence over raw answer text.

    Both parseable: canonical equality. Otherwise: whitespace-collapsed
    string identity, with a high-precision numeric comparison (200-bit,
    relative tolerance ``rel_tol``) as a fallback when both sides evaluate
    numerically.
    """
    a = try_parse(a_text)
    b = try_parse(b_text)
    if a is not None and b is not None:
        return a == b
    if opaque_key(a_text) == opaque_key(b_text):
        return True
    na = a.numeric() if a is not None else _numeric_of_text(a_text)
    nb = b.numeric() if b is not None else _numeric_of_text(b_text)
    if na is None or nb is None:
        return False
    with mpmath.workprec(200):
        diff = abs(na - nb)
        scale = max(mpmath.mpf(1), abs(na), abs(nb))
        return bool(diff <= mpmath.mpf(rel_tol) * scale)


def _numeric_of_text(text: str) -> mpmath.mpf | None:
    try:
        with mpmath.workprec(200):
            return mpmath.mpf(_normalize(text))
    except (ValueError, TypeError):
        return None
