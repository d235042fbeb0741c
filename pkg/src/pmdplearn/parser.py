"""Parser for the textual pMDP format.

Example::

    params: theta1 in [0,1], theta2 in [0,1];
    state s0 {
      action a {
        -> s1 : 0.3*theta1 + 0.7*theta2;
        -> s2 : 1 - 0.3*theta1 - 0.7*theta2;
      }
    }
    reward s0 a = 1;

Optional header lines: ``constraint: <linear> <= <rational>;``,
``init <state>;``, ``target: s, t;``, ``sense: max|min;``.
States referenced only as successors become sinks (no actions).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .model import PMDP, ModelError, ParameterSpace
from .polynomial import Polynomial


class ModelSyntaxError(ModelError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d*)?|\.\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<le><=)
  | (?P<op>[+\-*/(){}\[\],;:=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, col0 = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            col0 = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, m.start() - col0 + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - col0 + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.params: list[str] = []
        self.bounds: list = []
        self.constraints: list = []
        self.states: dict[str, int] = {}
        self.actions: dict[str, int] = {}
        self.blocks: dict[int, dict] = {}  # state -> {action: [(succ, poly, tok)]}
        self.declared: list[int] = []
        self.rewards: list = []
        self.init_name = None
        self.targets = None
        self.sense = None

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise ModelSyntaxError(msg, tok.line, tok.col)

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text=None, kind=None) -> _Tok:
        t = self.tok
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = repr(text) if text is not None else kind
            self.error(f"expected {want}, found {t.text or 'end of input'!r}")
        return self.next()

    def accept(self, text) -> bool:
        if self.tok.text == text and self.tok.kind != "eof":
            self.i += 1
            return True
        return False

    def state_id(self, name: str) -> int:
        if name not in self.states:
            self.states[name] = len(self.states)
        return self.states[name]

    # grammar
    def parse(self) -> PMDP:
        if self.tok.text != "params":
            self.error("model must start with a 'params:' header")
        while self.tok.kind != "eof":
            kw = self.tok
            if kw.kind != "ident":
                self.error(f"unexpected {kw.text!r}")
            {
                "params": self.p_params,
                "constraint": self.p_constraint,
                "init": self.p_init,
                "target": self.p_target,
                "sense": self.p_sense,
                "state": self.p_state,
                "reward": self.p_reward,
            }.get(kw.text, lambda: self.error(f"unknown keyword {kw.text!r}"))()
        return self.build()

    def p_params(self):
        self.expect("params")
        self.expect(":")
        if self.tok.text == ";":
            self.next()
            return
        while True:
            name = self.expect(kind="ident")
            if name.text in self.params:
                self.error(f"duplicate parameter {name.text!r}", name)
            self.expect("in")
            self.expect("[")
            lo = self.p_signed_rational()
            self.expect(",")
            hi = self.p_signed_rational()
            self.expect("]")
            if lo > hi:
                self.error(f"empty range for parameter {name.text!r}", name)
            self.params.append(name.text)
            self.bounds.append((lo, hi))
            if self.accept(";"):
                return
            self.expect(",")

    def p_constraint(self):
        start = self.expect("constraint")
        self.expect(":")
        poly = self.p_expr()
        self.expect("<=")
        rhs = self.p_signed_rational()
        self.expect(";")
        if not poly.is_linear():
            self.error("standing constraints must be linear", start)
        coeffs = [Fraction(0)] * len(self.params)
        for mono, c in poly.items():
            if mono == ():
                rhs -= c
            else:
                coeffs[mono[0][0]] = c
        self.constraints.append((tuple(coeffs), rhs))

    def p_init(self):
        self.expect("init")
        self.init_name = self.expect(kind="ident").text
        self.expect(";")

    def p_target(self):
        self.expect("target")
        self.expect(":")
        names = [self.expect(kind="ident").text]
        while self.accept(","):
            names.append(self.expect(kind="ident").text)
        self.expect(";")
        self.targets = [self.state_id(n) for n in names]

    def p_sense(self):
        self.expect("sense")
        self.expect(":")
        t = self.expect(kind="ident")
        if t.text not in ("max", "min"):
            self.error("sense must be 'max' or 'min'", t)
        self.sense = t.text
        self.expect(";")

    def p_state(self):
        self.expect("state")
        name = self.expect(kind="ident")
        s = self.state_id(name.text)
        if s in self.blocks:
            self.error(f"state {name.text!r} declared twice", name)
        block: dict = {}
        self.blocks[s] = block
        self.declared.append(s)
        self.expect("{")
        while not self.accept("}"):
            self.expect("action")
            aname = self.expect(kind="ident")
            if aname.text in block:
                self.error(f"action {aname.text!r} repeated in state {name.text!r}", aname)
            self.actions.setdefault(aname.text, len(self.actions))
            dist = []
            self.expect("{")
            while not self.accept("}"):
                self.expect("->")
                succ = self.expect(kind="ident")
                self.expect(":")
                poly = self.p_expr()
                self.expect(";")
                dist.append((self.state_id(succ.text), poly, succ))
            if not dist:
                self.error(f"action {aname.text!r} in state {name.text!r} has no transitions", aname)
            block[aname.text] = dist

    def p_reward(self):
        self.expect("reward")
        s = self.expect(kind="ident")
        a = self.expect(kind="ident")
        self.expect("=")
        r = self.p_signed_rational()
        self.expect(";")
        self.rewards.append((s, a, r))

    def p_signed_rational(self) -> Fraction:
        neg = self.accept("-")
        val = self.p_rational()
        return -val if neg else val

    def p_rational(self) -> Fraction:
        t = self.expect(kind="num")
        val = Fraction(t.text)
        if self.tok.text == "/" and self.toks[self.i + 1].kind == "num":
            self.next()
            d = self.next()
            if Fraction(d.text) == 0:
                self.error("division by zero", d)
            val = val / Fraction(d.text)
        return val

    # expressions: sum of products of signed factors
    def p_expr(self) -> Polynomial:
        neg = False
        if self.tok.kind == "op" and self.tok.text in ("+", "-"):
            neg = self.next().text == "-"
        acc = self.p_term()
        if neg:
            acc = -acc
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.next().text
            term = self.p_term()
            acc = acc + term if op == "+" else acc - term
        return acc

    def p_term(self) -> Polynomial:
        acc = self.p_factor()
        while True:
            if self.accept("*"):
                acc = acc * self.p_factor()
            elif self.tok.text == "/":
                slash = self.next()
                if self.tok.kind != "num":
                    self.error("only division by a rational constant is supported", slash)
                d = self.p_rational()
                if d == 0:
                    self.error("division by zero", slash)
                acc = acc * Polynomial.const(1 / d)
            else:
                return acc

    def p_factor(self) -> Polynomial:
        t = self.tok
        if t.kind == "num":
            return Polynomial.const(Fraction(self.next().text))
        if t.kind == "ident":
            self.next()
            if t.text not in self.params:
                self.error(f"unknown parameter {t.text!r}", t)
            return Polynomial.var(self.params.index(t.text))
        if self.accept("("):
            e = self.p_expr()
            self.expect(")")
            return e
        if self.accept("-"):
            return -self.p_factor()
        self.error(f"unexpected {t.text or 'end of input'!r} in expression")

    def build(self) -> PMDP:
        if not self.states:
            raise ModelError("model declares no states")
        state_names = [None] * len(self.states)
        for n, i in self.states.items():
            state_names[i] = n
        action_names = [None] * len(self.actions)
        for n, i in self.actions.items():
            action_names[i] = n
        enabled, trans = [], {}
        for s in range(len(state_names)):
            block = self.blocks.get(s, {})
            acts = tuple(sorted(self.actions[a] for a in block))
            enabled.append(acts)
            for aname, dist in block.items():
                trans[(s, self.actions[aname])] = tuple((t, f) for t, f, _ in dist)
        rewards = {}
        for sn, an, r in self.rewards:
            s, a = self.states.get(sn.text), self.actions.get(an.text)
            if s is None or a is None or a not in enabled[s]:
                raise ModelSyntaxError(
                    f"reward for unknown state/action pair ({sn.text}, {an.text})", sn.line, sn.col
                )
            if r < 0:
                raise ModelSyntaxError("rewards must be nonnegative", sn.line, sn.col)
            if (s, a) in rewards:
                raise ModelSyntaxError(f"duplicate reward for ({sn.text}, {an.text})", sn.line, sn.col)
            rewards[(s, a)] = r
        if self.init_name is not None:
            if self.init_name not in self.states:
                raise ModelError(f"unknown initial state {self.init_name!r}")
            init = self.states[self.init_name]
        else:
            init = self.declared[0] if self.declared else 0
        m = PMDP(
            states=tuple(state_names),
            actions=tuple(action_names),
            enabled=tuple(enabled),
            initial=init,
            params=ParameterSpace(tuple(self.params), tuple(self.bounds), tuple(self.constraints)),
            trans=trans,
            rewards=rewards,
            targets=frozenset(self.targets) if self.targets is not None else None,
            sense=self.sense,
        )
        m.validate()
        return m


def parse_model(text: str) -> PMDP:
    """Parse and validate a model file's contents."""
    return _Parser(text).parse()


def load_model(path) -> PMDP:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
