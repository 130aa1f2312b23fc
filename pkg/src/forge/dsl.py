"""Line-oriented theory language.

::

    theory henson3
    rel E/2
    forall x y: E(x,y) -> E(y,x)
    forall x: ~E(x,x)
    forbid 3: E(0,1) E(1,0) E(0,2) E(2,0) E(1,2) E(2,1)
    forall x exists y: E(x,y)

Declarations are ``rel NAME/INT``, ``fun NAME/INT`` and ``const NAME``.
Axioms are ``forall VARS [exists VARS] : formula`` (``forall`` may be left
out for purely existential axioms). Formulas use ``~ & | -> <->``, ``=`` and
``!=``, ``true``/``false``. ``forbid N: atoms`` excludes the structure on
``0..N-1`` whose listed atoms hold and all others fail. ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import fol
from .logic import And, FALSE, FiniteStructure, Iff, Implies, LogicError, Not, Or, QfFormula, Signature, TRUE
from .theory import Axiom, TheorySpec, forbid_matrix


class DSLSyntaxError(LogicError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DSLSemanticError(LogicError):
    pass


SELECTOR_MESSAGE = (
    "constant symbol {name!r} declared but relationalization is disabled; a constant is "
    "definable from nothing, and function symbols can only be choice functions, or "
    "selectors, in a structure with an invariant measure"
)

_TOKEN = re.compile(r"\s*(?:(<->|->|!=|[~&|()=,:/])|([A-Za-z_][A-Za-z0-9_'*]*)|(\d+))")


@dataclass
class _Tok:
    kind: str  # "op", "name", "int", "end"
    text: str
    col: int


def _lex(text: str, lineno: int) -> list:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            col = len(text) - len(text[pos:].lstrip()) + 1
            raise DSLSyntaxError(f"unexpected character {text[col - 1]!r}", lineno, col)
        col = m.start(m.lastindex) + 1
        if m.group(1):
            out.append(_Tok("op", m.group(1), col))
        elif m.group(2):
            out.append(_Tok("name", m.group(2), col))
        else:
            out.append(_Tok("int", m.group(3), col))
        pos = m.end()
    out.append(_Tok("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, toks, lineno, sig_rel, sig_fun, variables):
        self.toks = toks
        self.i = 0
        self.lineno = lineno
        self.rels = sig_rel
        self.funs = sig_fun
        self.variables = variables

    def peek(self):
        return self.toks[self.i]

    def take(self, text=None, kind=None):
        t = self.toks[self.i]
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = repr(text) if text is not None else kind
            got = repr(t.text) if t.kind != "end" else "end of line"
            raise DSLSyntaxError(f"expected {want}, got {got}", self.lineno, t.col)
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return DSLSyntaxError(msg, self.lineno, tok.col)

    def formula(self):
        left = self.implication()
        while self.peek().text == "<->":
            self.take()
            left = Iff(left, self.implication())
        return left

    def implication(self):
        left = self.disjunction()
        if self.peek().text == "->":
            self.take()
            return Implies(left, self.implication())
        return left

    def disjunction(self):
        args = [self.conjunction()]
        while self.peek().text == "|":
            self.take()
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conjunction(self):
        args = [self.unary()]
        while self.peek().text == "&":
            self.take()
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self):
        t = self.peek()
        if t.text == "~":
            self.take()
            return Not(self.unary())
        if t.text == "(":
            self.take()
            f = self.formula()
            self.take(")")
            return f
        if t.kind == "name" and t.text == "true":
            self.take()
            return TRUE
        if t.kind == "name" and t.text == "false":
            self.take()
            return FALSE
        if t.kind == "name" and t.text in self.rels and self.toks[self.i + 1].text == "(":
            self.take()
            self.take("(")
            terms = self.term_list()
            self.take(")")
            if len(terms) != self.rels[t.text]:
                raise DSLSemanticError(
                    f"line {self.lineno}: arity mismatch for {t.text}: expected "
                    f"{self.rels[t.text]}, got {len(terms)}")
            return fol.RelAtom(t.text, tuple(terms))
        left = self.term()
        op = self.peek()
        if op.text not in ("=", "!="):
            raise self.error("expected '=' or '!=' after term", op)
        self.take()
        right = self.term()
        atom = fol.EqAtom(left, right)
        return atom if op.text == "=" else Not(atom)

    def term_list(self):
        terms = [self.term()]
        while self.peek().text == ",":
            self.take()
            terms.append(self.term())
        return terms

    def term(self):
        t = self.take(kind="name")
        if t.text in self.funs:
            arity = self.funs[t.text]
            if arity == 0:
                return fol.App(t.text, ())
            self.take("(")
            args = self.term_list()
            self.take(")")
            if len(args) != arity:
                raise DSLSemanticError(
                    f"line {self.lineno}: arity mismatch for {t.text}: expected {arity}, got {len(args)}")
            return fol.App(t.text, tuple(args))
        if t.text in self.rels:
            raise self.error(f"relation {t.text!r} used as a term", t)
        if t.text not in self.variables:
            raise DSLSemanticError(f"line {self.lineno}: undeclared symbol {t.text!r}")
        return fol.Var(t.text)


def _vars(toks, start, stop_words, lineno):
    out = []
    i = start
    while toks[i].kind == "name" and toks[i].text not in stop_words:
        out.append(toks[i].text)
        i += 1
    if len(set(out)) != len(out):
        raise DSLSyntaxError("repeated bound variable", lineno, toks[start].col)
    return out, i


def parse_theory(text: str, relationalize: bool = False) -> TheorySpec:
    """Parse DSL source into a validated TheorySpec.

    Constants are rejected unless ``relationalize`` is set; function symbols are
    kept and must be relationalized before compilation.
    """
    name = "theory"
    relations, functions = [], []
    rel_arity, fun_arity = {}, {}
    universal, extension, forbidden = [], [], []
    n_ax = 0

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        toks = _lex(line, lineno)
        head = toks[0]
        if head.kind == "name" and head.text == "theory":
            rest = line.strip()[len("theory"):].strip()
            name = rest or name
            continue
        if head.kind == "name" and head.text in ("rel", "fun", "const"):
            nm = toks[1]
            if nm.kind != "name":
                raise DSLSyntaxError("expected a symbol name", lineno, nm.col)
            if nm.text in rel_arity or nm.text in fun_arity:
                raise DSLSemanticError(f"line {lineno}: symbol {nm.text!r} declared twice")
            if head.text == "const":
                if toks[2].kind != "end":
                    raise DSLSyntaxError("unexpected text after constant", lineno, toks[2].col)
                fun_arity[nm.text] = 0
                functions.append((nm.text, 0))
                continue
            if toks[2].text != "/" or toks[3].kind != "int" or toks[4].kind != "end":
                raise DSLSyntaxError("expected NAME/ARITY", lineno, toks[2].col)
            arity = int(toks[3].text)
            if head.text == "rel":
                if arity < 1:
                    raise DSLSemanticError(f"line {lineno}: relation arity must be >= 1")
                rel_arity[nm.text] = arity
                relations.append((nm.text, arity))
            else:
                fun_arity[nm.text] = arity
                functions.append((nm.text, arity))
            continue
        if head.kind == "name" and head.text == "forbid":
            forbidden.append(_parse_forbid(toks, lineno, rel_arity, Signature(tuple(relations))))
            continue

        # axiom
        i = 0
        xs, ys = [], []
        if toks[i].text == "forall":
            xs, i = _vars(toks, i + 1, {"exists"}, lineno)
        if toks[i].text == "exists":
            ys, i = _vars(toks, i + 1, set(), lineno)
        if i == 0:
            raise DSLSyntaxError(f"unknown statement {head.text!r}", lineno, head.col)
        if toks[i].text != ":":
            raise DSLSyntaxError("expected ':'", lineno, toks[i].col)
        if set(xs) & set(ys):
            raise DSLSyntaxError("variable bound twice", lineno, toks[i].col)
        for v in xs + ys:
            if v in rel_arity or v in fun_arity:
                raise DSLSemanticError(f"line {lineno}: variable {v!r} shadows a symbol")
        p = _Parser(toks, lineno, rel_arity, fun_arity, set(xs) | set(ys))
        p.i = i + 1
        tree = p.formula()
        p.take(kind="end")
        label = f"ax{n_ax}"
        n_ax += 1
        if fol.has_function_terms(tree):
            ax = Axiom(tuple(xs), tuple(ys), None, tree, label)
        else:
            m = QfFormula.from_tree(tuple(xs) + tuple(ys), fol.atoms_to_literals(tree))
            ax = Axiom(tuple(xs), tuple(ys), m, None, label)
        (extension if ys else universal).append(ax)

    for fname, arity in functions:
        if arity == 0 and not relationalize:
            raise DSLSemanticError(SELECTOR_MESSAGE.format(name=fname))

    sig = Signature(tuple(relations), tuple(functions))
    for k, pat in enumerate(forbidden):
        universal.append(Axiom(tuple(f"v{i}" for i in range(pat.size)), (), forbid_matrix(pat),
                               None, f"forbid{k}"))
    return TheorySpec(name, sig, tuple(universal), tuple(extension), tuple(forbidden))


def _parse_forbid(toks, lineno, rel_arity, sig):
    if toks[1].kind != "int" or toks[2].text != ":":
        raise DSLSyntaxError("expected 'forbid N:'", lineno, toks[1].col)
    n = int(toks[1].text)
    rels = {r: set() for r in rel_arity}
    i = 3
    while toks[i].kind != "end":
        t = toks[i]
        if t.kind != "name" or t.text not in rel_arity:
            raise DSLSemanticError(f"line {lineno}: undeclared symbol {t.text!r}")
        if toks[i + 1].text != "(":
            raise DSLSyntaxError("expected '('", lineno, toks[i + 1].col)
        i += 2
        args = []
        while True:
            a = toks[i]
            if a.kind != "int":
                raise DSLSyntaxError("expected an element index", lineno, a.col)
            args.append(int(a.text))
            i += 1
            if toks[i].text == ",":
                i += 1
                continue
            if toks[i].text == ")":
                i += 1
                break
            raise DSLSyntaxError("expected ',' or ')'", lineno, toks[i].col)
        if len(args) != rel_arity[t.text]:
            raise DSLSemanticError(f"line {lineno}: arity mismatch for {t.text}")
        if any(a >= n for a in args):
            raise DSLSemanticError(f"line {lineno}: element index out of range in forbid")
        rels[t.text].add(tuple(args))
        if toks[i].text == ",":
            i += 1
    return FiniteStructure(sig, n, rels)
