"""Holomorphic expressions in n complex variables, with exact jets.

Grammar (whitespace insignificant):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' int)?
    base   := 'z'INT | number | 'i' | 'pi'
            | '(' expr ')' | ('exp'|'log') '(' expr ')' | '-' base

Variables are z1..zn (1-based).  Exponents are integers, possibly
negative; general complex powers are excluded so jets stay single
valued.  Note that '^' applies to a base, so -z1^2 parses as (-z1)^2.
Complex literals are written as a + b*i.

Evaluation produces a HoloJet: the value together with holomorphic
derivatives through order 3, computed by truncated-series (forward
mode) arithmetic, never by finite differences.  log uses the principal
branch.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

__all__ = [
    "ExpressionAST",
    "HoloJet",
    "ParseError",
    "UnknownVariable",
    "EvaluationError",
    "PoleHit",
    "BranchPoint",
    "parse_expression",
    "eval_jet",
    "to_source",
]


class ParseError(SyntaxError):
    """Malformed expression source; carries the offending position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class UnknownVariable(ParseError):
    """Variable index outside 1..n."""


class EvaluationError(ArithmeticError):
    """Expression cannot be evaluated at the given point."""


class PoleHit(EvaluationError):
    """Division by zero met during evaluation."""


class BranchPoint(EvaluationError):
    """log evaluated at zero."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Func:
    name: str  # exp or log
    arg: "Node"


@dataclass(frozen=True)
class Neg:
    arg: "Node"


Node = Union[Var, Const, BinOp, Pow, Func, Neg]


@dataclass(frozen=True)
class ExpressionAST:
    """Parsed holomorphic expression in n complex variables."""

    root: Node
    n: int


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_OPS = set("+-*/^()")


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num', 'ident', 'op', 'eof'
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    # U+2212 appears in math-flavoured input; treat it as '-'.
    src = source.replace("−", "-")
    tokens: list[_Token] = []
    i = 0
    while i < len(src):
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < len(src) and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < len(src) and src[j] in "eE":
                k = j + 1
                if k < len(src) and src[k] in "+-":
                    k += 1
                if k < len(src) and src[k].isdigit():
                    j = k
                    while j < len(src) and src[j].isdigit():
                        j += 1
            text = src[i:j]
            if text.count(".") > 1:
                raise ParseError(f"bad number {text!r}", i)
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(_Token("ident", src[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(_Token("eof", "", len(src)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token], n: int):
        self.tokens = tokens
        self.pos = 0
        self.n = n

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def match_op(self, *ops: str) -> Optional[str]:
        tok = self.current
        if tok.kind == "op" and tok.text in ops:
            self.advance()
            return tok.text
        return None

    def expect_op(self, op: str) -> None:
        tok = self.current
        if tok.kind != "op" or tok.text != op:
            raise ParseError(f"expected {op!r}, got {tok.text or 'end of input'!r}", tok.pos)
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self.current
        if tok.kind != "eof":
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            op = self.match_op("+", "-")
            if op is None:
                return node
            node = BinOp(op, node, self.term())

    def term(self) -> Node:
        node = self.factor()
        while True:
            op = self.match_op("*", "/")
            if op is None:
                return node
            node = BinOp(op, node, self.factor())

    def factor(self) -> Node:
        node = self.base()
        if self.match_op("^"):
            node = Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        sign = -1 if self.match_op("-") else 1
        tok = self.current
        if tok.kind != "num":
            raise ParseError("expected integer exponent", tok.pos)
        try:
            value = int(tok.text)
        except ValueError:
            raise ParseError(f"exponent must be an integer, got {tok.text!r}", tok.pos) from None
        self.advance()
        return sign * value

    def base(self) -> Node:
        tok = self.current
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.base())
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        if tok.kind == "num":
            self.advance()
            return Const(complex(float(tok.text)))
        if tok.kind == "ident":
            return self.ident()
        raise ParseError(f"expected a value, got {tok.text or 'end of input'!r}", tok.pos)

    def ident(self) -> Node:
        tok = self.advance()
        name = tok.text
        if name == "i":
            return Const(1j)
        if name == "pi":
            return Const(complex(cmath.pi))
        if name in ("exp", "log"):
            self.expect_op("(")
            node = self.expr()
            self.expect_op(")")
            return Func(name, node)
        if name[0] == "z" and name[1:].isdigit():
            index = int(name[1:])
            if index == 0:
                raise ParseError("variables are z1..zn, there is no z0", tok.pos)
            if index > self.n:
                raise UnknownVariable(f"variable z{index} exceeds declared n={self.n}", tok.pos)
            return Var(index)
        raise ParseError(f"unknown identifier {name!r}", tok.pos)


def parse_expression(source: str, n: int) -> ExpressionAST:
    """Parse source into an immutable AST over n complex variables."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    return ExpressionAST(_Parser(_tokenize(source), n).parse(), n)


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".17g")


def _fmt_const(c: complex) -> tuple[str, bool]:
    """Render a complex literal; second value marks an atomic result."""
    re, im = c.real, c.imag
    if im == 0.0:
        if re < 0:
            return f"-{_fmt_float(-re)}", False
        return _fmt_float(re), True
    if re == 0.0:
        if im == 1.0:
            return "i", True
        if im == -1.0:
            return "-i", False
        if im < 0:
            return f"-{_fmt_float(-im)}*i", False
        return f"{_fmt_float(im)}*i", False
    sign = "-" if im < 0 else "+"
    mag = -im if im < 0 else im
    tail = "i" if mag == 1.0 else f"{_fmt_float(mag)}*i"
    return f"({_fmt_float(re)} {sign} {tail})", True


def _print(node: Node) -> tuple[str, bool]:
    """Return (source, atomic) where atomic means usable as a '^' base."""
    if isinstance(node, Var):
        return f"z{node.index}", True
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Neg):
        inner, atomic = _print(node.arg)
        return f"-{inner if atomic else f'({inner})'}", False
    if isinstance(node, Func):
        inner, _ = _print(node.arg)
        return f"{node.name}({inner})", True
    if isinstance(node, Pow):
        inner, atomic = _print(node.base)
        base = inner if atomic else f"({inner})"
        exp = str(node.exponent) if node.exponent >= 0 else f"-{-node.exponent}"
        return f"{base}^{exp}", False
    if isinstance(node, BinOp):
        left, _ = _print(node.left)
        right, _ = _print(node.right)
        if node.op in "+-":
            rneed = isinstance(node.right, BinOp) and node.right.op in "+-"
            if node.op == "-" and (rneed or right.startswith("-")):
                right = f"({right})"
            if left.startswith("-"):
                left = f"({left})"
            return f"{left} {node.op} {right}", False
        lneed = (isinstance(node.left, BinOp) and node.left.op in "+-") or left.startswith("-")
        rneed = (isinstance(node.right, BinOp)) or right.startswith("-")
        ls = f"({left})" if lneed else left
        rs = f"({right})" if rneed else right
        return f"{ls} {node.op} {rs}", False
    raise TypeError(f"not an AST node: {node!r}")


def to_source(ast: ExpressionAST) -> str:
    """Render an AST back to grammar-conformant source."""
    return _print(ast.root)[0]


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HoloJet:
    """Value and holomorphic derivatives through `order` at a point.

    grad[j] = dF/dz^j, hess[j][k] = d2F/dz^j dz^k, third totally
    symmetric.  Arrays above the requested order are None.
    """

    order: int
    n: int
    value: complex
    grad: Optional[np.ndarray] = None
    hess: Optional[np.ndarray] = None
    third: Optional[np.ndarray] = None

    def __add__(self, other: "HoloJet") -> "HoloJet":
        k, n = self.order, self.n
        return HoloJet(
            k, n, self.value + other.value,
            self.grad + other.grad if k >= 1 else None,
            self.hess + other.hess if k >= 2 else None,
            self.third + other.third if k >= 3 else None,
        )

    def __sub__(self, other: "HoloJet") -> "HoloJet":
        return self + (-other)

    def __neg__(self) -> "HoloJet":
        k, n = self.order, self.n
        return HoloJet(
            k, n, -self.value,
            -self.grad if k >= 1 else None,
            -self.hess if k >= 2 else None,
            -self.third if k >= 3 else None,
        )

    def __mul__(self, other: "HoloJet") -> "HoloJet":
        k, n = self.order, self.n
        f, g = self, other
        value = f.value * g.value
        grad = hess = third = None
        if k >= 1:
            grad = f.grad * g.value + f.value * g.grad
        if k >= 2:
            cross = np.outer(f.grad, g.grad)
            hess = f.hess * g.value + cross + cross.T + f.value * g.hess
        if k >= 3:
            third = f.third * g.value + f.value * g.third
            third = third + _sym_1_2(f.grad, g.hess) + _sym_1_2(g.grad, f.hess)
        return HoloJet(k, n, value, grad, hess, third)

    def __truediv__(self, other: "HoloJet") -> "HoloJet":
        k, n = self.order, self.n
        f, g = self, other
        if g.value == 0:
            raise PoleHit("division by zero")
        value = f.value / g.value
        grad = hess = third = None
        if k >= 1:
            grad = (f.grad - value * g.grad) / g.value
        if k >= 2:
            cross = np.outer(grad, g.grad)
            hess = (f.hess - cross - cross.T - value * g.hess) / g.value
        if k >= 3:
            third = (
                f.third - value * g.third
                - _sym_1_2(grad, g.hess) - _sym_1_2(g.grad, hess)
            ) / g.value
        return HoloJet(k, n, value, grad, hess, third)


def _sym_1_2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Symmetrized product of a gradient with a symmetric matrix:
    sum over which of the three slots carries the gradient index."""
    t = np.einsum("i,jk->ijk", a, b)
    return t + np.einsum("j,ik->ijk", a, b) + np.einsum("k,ij->ijk", a, b)


def _jet_const(value: complex, n: int, order: int) -> HoloJet:
    return HoloJet(
        order, n, complex(value),
        np.zeros(n, dtype=complex) if order >= 1 else None,
        np.zeros((n, n), dtype=complex) if order >= 2 else None,
        np.zeros((n, n, n), dtype=complex) if order >= 3 else None,
    )


def _jet_var(index: int, z: np.ndarray, n: int, order: int) -> HoloJet:
    jet = _jet_const(complex(z[index - 1]), n, order)
    if order >= 1:
        jet.grad[index - 1] = 1.0
    return jet


def _jet_exp(f: HoloJet) -> HoloJet:
    k, n = f.order, f.n
    try:
        value = cmath.exp(f.value)
    except OverflowError as err:
        # callers distinguish only evaluability, not the float-range detail
        raise EvaluationError(f"exp overflows at {f.value}") from err
    grad = hess = third = None
    if k >= 1:
        grad = value * f.grad
    if k >= 2:
        hess = value * (f.hess + np.outer(f.grad, f.grad))
    if k >= 3:
        third = value * (
            f.third + _sym_1_2(f.grad, f.hess)
            + np.einsum("i,j,k->ijk", f.grad, f.grad, f.grad)
        )
    return HoloJet(k, n, value, grad, hess, third)


def _jet_log(f: HoloJet) -> HoloJet:
    k, n = f.order, f.n
    if f.value == 0:
        raise BranchPoint("log(0)")
    value = cmath.log(f.value)
    grad = hess = third = None
    if k >= 1:
        grad = f.grad / f.value
    if k >= 2:
        hess = f.hess / f.value - np.outer(grad, grad)
    if k >= 3:
        third = (
            f.third / f.value
            - _sym_1_2(grad, f.hess) / f.value
            + 2.0 * np.einsum("i,j,k->ijk", grad, grad, grad)
        )
    return HoloJet(k, n, value, grad, hess, third)


def _jet_pow(f: HoloJet, exponent: int, n: int, order: int) -> HoloJet:
    if exponent < 0:
        return _jet_const(1.0, n, order) / _jet_pow(f, -exponent, n, order)
    result = _jet_const(1.0, n, order)
    base, e = f, exponent
    while e > 0:
        if e & 1:
            result = result * base
        base = base * base if e > 1 else base
        e >>= 1
    return result


def _eval(node: Node, z: np.ndarray, n: int, order: int) -> HoloJet:
    if isinstance(node, Const):
        return _jet_const(node.value, n, order)
    if isinstance(node, Var):
        return _jet_var(node.index, z, n, order)
    if isinstance(node, Neg):
        return -_eval(node.arg, z, n, order)
    if isinstance(node, BinOp):
        left = _eval(node.left, z, n, order)
        right = _eval(node.right, z, n, order)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right
    if isinstance(node, Pow):
        return _jet_pow(_eval(node.base, z, n, order), node.exponent, n, order)
    if isinstance(node, Func):
        arg = _eval(node.arg, z, n, order)
        return _jet_exp(arg) if node.name == "exp" else _jet_log(arg)
    raise TypeError(f"not an AST node: {node!r}")


def eval_jet(ast: ExpressionAST, z: np.ndarray, order: int = 2) -> HoloJet:
    """Evaluate the expression at z with exact derivatives through `order`."""
    if not 0 <= order <= 3:
        raise ValueError("order must be between 0 and 3")
    z = np.asarray(z, dtype=complex)
    if z.shape != (ast.n,):
        raise ValueError(f"expected a point in C^{ast.n}, got shape {z.shape}")
    return _eval(ast.root, z, ast.n, order)
