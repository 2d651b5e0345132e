"""Sparse multivariate polynomial arithmetic over a shared variable registry.

Variables are split into state variables (x1..xn) and parameter variables
(p1..pm).  Polynomials are immutable dictionaries from exponent vectors to
float coefficients; all arithmetic returns new objects.  Gradients are taken
with respect to state variables only, parameters being constants in time, and
composition substitutes state variables while letting parameters pass through.
This is exactly the convention needed for Lyapunov conditions of the form
grad(V)^T f and V(phi(x)) over an uncertain-parameter ring.

Term order is graded lexicographic (total degree first, then x1-major) and is
used everywhere a deterministic order matters: printing, monomial bases, and
SDP assembly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "VariableRegistry",
    "Monomial",
    "Polynomial",
    "PolynomialVector",
    "ParseError",
    "parse",
    "monomial_basis",
]


@dataclass(frozen=True)
class VariableRegistry:
    """Ordered variable names partitioned into state and parameter variables."""

    names: tuple[str, ...]
    n_state: int

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate variable names in {self.names}")
        if not 0 <= self.n_state <= len(self.names):
            raise ValueError("state partition out of range")

    @staticmethod
    def make(state: Sequence[str], params: Sequence[str] = ()) -> "VariableRegistry":
        return VariableRegistry(tuple(state) + tuple(params), len(state))

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def n_params(self) -> int:
        return len(self.names) - self.n_state

    @property
    def state_names(self) -> tuple[str, ...]:
        return self.names[: self.n_state]

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.names[self.n_state:]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}") from None

    def is_param(self, i: int) -> bool:
        return i >= self.n_state


@dataclass(frozen=True)
class Monomial:
    """Exponent vector over a registry's variables."""

    exponents: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(e < 0 for e in self.exponents):
            raise ValueError(f"negative exponent in {self.exponents}")

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def state_degree(self, reg: VariableRegistry) -> int:
        return sum(self.exponents[: reg.n_state])

    def param_degree(self, reg: VariableRegistry) -> int:
        return sum(self.exponents[reg.n_state:])

    def __mul__(self, other: "Monomial") -> "Monomial":
        return Monomial(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def sort_key(self) -> tuple:
        # graded lex, earlier variables dominate within a degree level
        return (self.degree, tuple(-e for e in self.exponents))

    def evaluate(self, point: np.ndarray) -> float:
        v = 1.0
        for e, t in zip(self.exponents, point):
            if e:
                v *= t ** e
        return v


def _unit(size: int, i: int, e: int = 1) -> tuple[int, ...]:
    exps = [0] * size
    exps[i] = e
    return tuple(exps)


class Polynomial:
    """Immutable sparse polynomial tied to a VariableRegistry."""

    __slots__ = ("registry", "terms", "_exp_cache")

    def __init__(self, registry: VariableRegistry, terms: Mapping[Monomial, float]):
        clean = {m: float(c) for m, c in terms.items() if c != 0.0}
        for m in clean:
            if len(m.exponents) != registry.size:
                raise ValueError(
                    f"monomial arity {len(m.exponents)} != registry size {registry.size}")
        self.registry = registry
        self.terms: dict[Monomial, float] = clean
        self._exp_cache: tuple[np.ndarray, np.ndarray] | None = None

    # ---- constructors ----

    @staticmethod
    def zero(reg: VariableRegistry) -> "Polynomial":
        return Polynomial(reg, {})

    @staticmethod
    def constant(reg: VariableRegistry, c: float) -> "Polynomial":
        return Polynomial(reg, {Monomial((0,) * reg.size): c})

    @staticmethod
    def variable(reg: VariableRegistry, name_or_index: str | int) -> "Polynomial":
        i = reg.index(name_or_index) if isinstance(name_or_index, str) else name_or_index
        return Polynomial(reg, {Monomial(_unit(reg.size, i)): 1.0})

    # ---- ring operations ----

    def _require_same(self, other: "Polynomial") -> None:
        if other.registry != self.registry:
            raise ValueError("registry mismatch between polynomial operands")

    def __add__(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.registry, other)
        self._require_same(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return Polynomial(self.registry, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.registry, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.registry, other)
        return self + (-other)

    def __rsub__(self, other: "Polynomial | float | int") -> "Polynomial":
        return (-self) + other

    def __mul__(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, (int, float)):
            return Polynomial(self.registry, {m: c * other for m, c in self.terms.items()})
        self._require_same(other)
        out: dict[Monomial, float] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = ma * mb
                out[m] = out.get(m, 0.0) + ca * cb
        return Polynomial(self.registry, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise ValueError("negative power")
        acc = Polynomial.constant(self.registry, 1.0)
        base = self
        while n:
            if n & 1:
                acc = acc * base
            base = base * base if n > 1 else base
            n >>= 1
        return acc

    def scale(self, c: float) -> "Polynomial":
        return self * c

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Polynomial)
                and self.registry == other.registry
                and self.terms == other.terms)

    def __hash__(self) -> int:
        return hash((self.registry, frozenset(self.terms.items())))

    # ---- queries ----

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((m.degree for m in self.terms), default=-1)

    def state_degree(self) -> int:
        return max((m.state_degree(self.registry) for m in self.terms), default=-1)

    def param_degree(self) -> int:
        return max((m.param_degree(self.registry) for m in self.terms), default=0)

    def coefficient(self, m: Monomial) -> float:
        return self.terms.get(m, 0.0)

    def constant_term(self) -> float:
        return self.terms.get(Monomial((0,) * self.registry.size), 0.0)

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0].sort_key())

    def __iter__(self) -> Iterator[tuple[Monomial, float]]:
        return iter(self.sorted_terms())

    # ---- calculus ----

    def diff(self, var: int | str) -> "Polynomial":
        i = self.registry.index(var) if isinstance(var, str) else var
        out: dict[Monomial, float] = {}
        for m, c in self.terms.items():
            e = m.exponents[i]
            if e == 0:
                continue
            exps = list(m.exponents)
            exps[i] = e - 1
            dm = Monomial(tuple(exps))
            out[dm] = out.get(dm, 0.0) + c * e
        return Polynomial(self.registry, out)

    def gradient(self) -> list["Polynomial"]:
        """Partial derivatives with respect to state variables only."""
        return [self.diff(i) for i in range(self.registry.n_state)]

    def compose(self, subst: Sequence["Polynomial"]) -> "Polynomial":
        """Substitute state variables by `subst`; parameters pass through."""
        reg = self.registry
        if len(subst) != reg.n_state:
            raise ValueError(
                f"substitution length {len(subst)} != state dimension {reg.n_state}")
        for s in subst:
            self._require_same(s)
        param_vars = [Polynomial.variable(reg, i) for i in range(reg.n_state, reg.size)]
        out = Polynomial.zero(reg)
        for m, c in self.terms.items():
            term = Polynomial.constant(reg, c)
            for i, e in enumerate(m.exponents):
                if e == 0:
                    continue
                base = subst[i] if i < reg.n_state else param_vars[i - reg.n_state]
                term = term * base ** e
            out = out + term
        return out

    def shift(self, z: Sequence[float]) -> "Polynomial":
        """Recenter: substitute x_i -> x_i + z_i (state variables only)."""
        reg = self.registry
        subst = [Polynomial.variable(reg, i) + float(z[i]) for i in range(reg.n_state)]
        return self.compose(subst)

    # ---- evaluation ----

    def _exps(self) -> tuple[np.ndarray, np.ndarray]:
        if self._exp_cache is None:
            items = self.sorted_terms()
            E = np.array([m.exponents for m, _ in items], dtype=np.int64).reshape(
                len(items), self.registry.size)
            c = np.array([v for _, v in items], dtype=float)
            self._exp_cache = (E, c)
        return self._exp_cache

    def evaluate(self, point: Sequence[float]) -> float:
        pt = np.asarray(point, dtype=float)
        if pt.shape != (self.registry.size,):
            raise ValueError(f"point shape {pt.shape} != ({self.registry.size},)")
        if not self.terms:
            return 0.0
        E, c = self._exps()
        return float(np.dot(c, np.prod(pt[None, :] ** E, axis=1)))

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (N, size) array of points, returning length-N vector."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.registry.size:
            raise ValueError(f"points shape {pts.shape} incompatible with registry")
        if not self.terms:
            return np.zeros(pts.shape[0])
        E, c = self._exps()
        return np.prod(pts[:, None, :] ** E[None, :, :], axis=2) @ c

    # ---- printing ----

    def _fmt_coeff(self, c: float) -> str:
        if c == int(c) and abs(c) < 1e15:
            return str(int(c))
        return repr(c)

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts: list[str] = []
        for m, c in self.sorted_terms():
            factors: list[str] = []
            for name, e in zip(self.registry.names, m.exponents):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            mag = abs(c)
            if not factors:
                body = self._fmt_coeff(mag)
            elif mag == 1.0:
                body = "*".join(factors)
            else:
                body = "*".join([self._fmt_coeff(mag)] + factors)
            if not parts:
                parts.append(body if c >= 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if c >= 0 else f"- {body}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()!r})"


PolynomialVector = list[Polynomial]


def evaluate_vector(fs: Sequence[Polynomial], point: Sequence[float]) -> np.ndarray:
    return np.array([f.evaluate(point) for f in fs])


def monomial_basis(reg: VariableRegistry,
                   var_indices: Sequence[int] | None = None,
                   max_degree: int = 0) -> list[Monomial]:
    """All monomials in the chosen variables with total degree <= max_degree,
    in graded-lex order."""
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    idx = list(range(reg.size)) if var_indices is None else list(var_indices)
    out: list[Monomial] = []

    def rec(pos: int, remaining: int, exps: list[int]) -> None:
        if pos == len(idx):
            out.append(Monomial(tuple(exps)))
            return
        i = idx[pos]
        for e in range(remaining + 1):
            exps[i] = e
            rec(pos + 1, remaining - e, exps)
        exps[i] = 0

    rec(0, max_degree, [0] * reg.size)
    out.sort(key=Monomial.sort_key)
    return out


class ParseError(ValueError):
    """Raised on malformed polynomial text; carries position and message."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class _Parser:
    def __init__(self, text: str, reg: VariableRegistry,
                 constants: Mapping[str, float] | None):
        self.text = text
        self.reg = reg
        self.constants = dict(constants or {})
        self.pos = 0

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def parse_expr(self) -> Polynomial:
        acc = self.parse_term()
        while True:
            c = self.peek()
            if c == "+":
                self.pos += 1
                acc = acc + self.parse_term()
            elif c == "-":
                self.pos += 1
                acc = acc - self.parse_term()
            else:
                return acc

    def parse_term(self) -> Polynomial:
        acc = self.parse_factor()
        while self.peek() == "*":
            self.pos += 1
            acc = acc * self.parse_factor()
        return acc

    def parse_factor(self) -> Polynomial:
        sign = 1.0
        while self.peek() == "-":
            self.pos += 1
            sign = -sign
        base = self.parse_atom()
        if self.peek() == "^":
            self.pos += 1
            e = self.parse_int()
            base = base ** e
        return base * sign if sign < 0 else base

    def parse_int(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            raise self.error("expected integer exponent")
        return int(self.text[start:self.pos])

    def parse_atom(self) -> Polynomial:
        self.skip_ws()
        if self.pos >= len(self.text):
            raise self.error("unexpected end of input")
        c = self.text[self.pos]
        if c == "(":
            self.pos += 1
            inner = self.parse_expr()
            if not self.take(")"):
                raise self.error("expected ')'")
            return inner
        if c.isdigit() or c == ".":
            return Polynomial.constant(self.reg, self.parse_number())
        if c.isalpha() or c == "_":
            name = self.parse_ident()
            if name in self.reg.names:
                return Polynomial.variable(self.reg, name)
            if name in self.constants:
                return Polynomial.constant(self.reg, self.constants[name])
            raise self.error(f"unknown identifier {name!r}")
        raise self.error(f"unexpected character {c!r}")

    def parse_number(self) -> float:
        start = self.pos
        seen_dot = seen_exp = False
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch.isdigit():
                self.pos += 1
            elif ch == "." and not seen_dot and not seen_exp:
                seen_dot = True
                self.pos += 1
            elif ch in "eE" and not seen_exp and self.pos > start:
                nxt = self.text[self.pos + 1: self.pos + 2]
                if nxt.isdigit() or nxt in "+-":
                    seen_exp = True
                    self.pos += 1
                    if nxt in "+-":
                        self.pos += 1
                else:
                    break
            else:
                break
        try:
            return float(self.text[start:self.pos])
        except ValueError:
            self.pos = start
            raise self.error("malformed number") from None

    def parse_ident(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum()
                                             or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start:self.pos]


def parse(text: str, reg: VariableRegistry,
          constants: Mapping[str, float] | None = None) -> Polynomial:
    """Parse polynomial text over the registry's variables.

    Identifiers not in the registry are resolved through `constants` (named
    numeric constants substituted at parse time); anything else is an error
    with the offending position.
    """
    p = _Parser(text, reg, constants)
    out = p.parse_expr()
    p.skip_ws()
    if p.pos != len(text):
        raise p.error("trailing input")
    return out
