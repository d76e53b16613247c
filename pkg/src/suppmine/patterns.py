"""Discovery-pattern definition language: tokenizer, parser, validation.

A pattern is a linear chain of node constraints joined by directed edge
constraints::

    # comment
    pattern dsgd {
      node supplement { supplement: true }
      edge supplement -> gene { pred: [INHIBITS, STIMULATES] }
      node gene { semtype: [gngm, aapp] }
      edge gene -> drug { pred: [PRODUCES] }
      node drug { semtype: [phsu], supplement: false }
    }

``a -> b`` requires a stored edge from a's binding to b's; ``a <- b`` reverses
it (the stored edge points b -> a).  Each edge must connect the node declared
right before it to the node declared right after it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .errors import SuppmineError
from .vocab import PREDICATES

CUI_PATTERN = re.compile(r"^C\d{7}$")

DIRECTION_FORWARD = "forward"
DIRECTION_REVERSE = "reverse"

BUILTIN_PATTERNS = ("dsgd", "dsgfgd")


class PatternError(SuppmineError):
    """Base for pattern-text problems."""


class PatternSyntaxError(PatternError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class PatternValidationError(PatternError):
    """The text parses but breaks a structural rule."""


@dataclass(frozen=True)
class NodeConstraint:
    """Conditions a graph node must meet to bind a pattern position.

    Absent (None) fields always match; ``semtypes`` matches on non-empty
    intersection.
    """

    label: str
    semtypes: frozenset[str] | None = None
    require_supplement: bool | None = None
    cui_allow: frozenset[str] | None = None
    cui_deny: frozenset[str] | None = None


@dataclass(frozen=True)
class EdgeConstraint:
    from_label: str
    to_label: str
    predicates: frozenset[str]
    direction: str = DIRECTION_FORWARD


@dataclass(frozen=True)
class PatternSpec:
    name: str
    nodes: tuple[NodeConstraint, ...]
    edges: tuple[EdgeConstraint, ...]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise PatternValidationError(
                f"pattern {self.name!r} needs at least 2 nodes")
        if len(self.edges) != len(self.nodes) - 1:
            raise PatternValidationError(
                f"pattern {self.name!r} needs exactly one edge per adjacent "
                f"node pair")
        labels = [n.label for n in self.nodes]
        if len(set(labels)) != len(labels):
            raise PatternValidationError(
                f"pattern {self.name!r} reuses a node label")
        for i, edge in enumerate(self.edges):
            if edge.from_label != labels[i] or edge.to_label != labels[i + 1]:
                raise PatternValidationError(
                    f"pattern {self.name!r}: edge {i} must connect "
                    f"{labels[i]!r} to {labels[i + 1]!r} (the pattern must be "
                    f"a linear path)")
            if not edge.predicates:
                raise PatternValidationError(
                    f"pattern {self.name!r}: edge {i} has no predicates")
            unknown = edge.predicates - PREDICATES
            if unknown:
                raise PatternValidationError(
                    f"pattern {self.name!r}: unknown predicate(s) "
                    + ", ".join(sorted(unknown)))


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | punct | arrow
    value: str
    line: int
    column: int


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, column = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            column = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            column += 1
            continue
        if ch == "#":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if text.startswith("->", i):
            tokens.append(_Token("arrow", "->", line, column))
            i += 2
            column += 2
            continue
        if text.startswith("<-", i):
            tokens.append(_Token("arrow", "<-", line, column))
            i += 2
            column += 2
            continue
        if ch in "{}[],:":
            tokens.append(_Token("punct", ch, line, column))
            i += 1
            column += 1
            continue
        match = _IDENT_RE.match(text, i)
        if match:
            value = match.group(0)
            tokens.append(_Token("ident", value, line, column))
            i = match.end()
            column += len(value)
            continue
        raise PatternSyntaxError(f"unexpected character {ch!r}", line, column)
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], text: str):
        self.tokens = tokens
        self.pos = 0
        last_line = text.count("\n") + 1
        self.eof = _Token("eof", "", last_line, 1)

    def peek(self) -> _Token:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else self.eof

    def take(self) -> _Token:
        token = self.peek()
        self.pos = min(self.pos + 1, len(self.tokens))
        return token

    def expect(self, kind: str, value: str | None = None) -> _Token:
        token = self.take()
        if token.kind != kind or (value is not None and token.value != value):
            wanted = value if value is not None else kind
            raise PatternSyntaxError(
                f"expected {wanted!r}, found {token.value or 'end of input'!r}",
                token.line, token.column)
        return token

    def expect_keyword(self, word: str) -> _Token:
        token = self.take()
        if token.kind != "ident" or token.value != word:
            raise PatternSyntaxError(
                f"expected {word!r}, found {token.value or 'end of input'!r}",
                token.line, token.column)
        return token

    def ident_list(self) -> list[_Token]:
        self.expect("punct", "[")
        items = [self.expect("ident")]
        while self.peek().value == ",":
            self.take()
            items.append(self.expect("ident"))
        self.expect("punct", "]")
        return items


def _parse_node(parser: _Parser) -> NodeConstraint:
    label = parser.expect("ident").value
    parser.expect("punct", "{")
    semtypes = require_supplement = allow = deny = None
    while parser.peek().value != "}":
        key = parser.expect("ident")
        parser.expect("punct", ":")
        if key.value == "semtype":
            if semtypes is not None:
                raise PatternSyntaxError("duplicate semtype constraint",
                                         key.line, key.column)
            semtypes = frozenset(t.value for t in parser.ident_list())
        elif key.value == "supplement":
            if require_supplement is not None:
                raise PatternSyntaxError("duplicate supplement constraint",
                                         key.line, key.column)
            flag = parser.expect("ident")
            if flag.value not in ("true", "false"):
                raise PatternSyntaxError(
                    f"supplement takes true or false, found {flag.value!r}",
                    flag.line, flag.column)
            require_supplement = flag.value == "true"
        elif key.value in ("allow", "deny"):
            if (allow if key.value == "allow" else deny) is not None:
                raise PatternSyntaxError(f"duplicate {key.value} constraint",
                                         key.line, key.column)
            cuis = parser.ident_list()
            for token in cuis:
                if not CUI_PATTERN.match(token.value):
                    raise PatternSyntaxError(
                        f"{key.value} entries must be concept ids "
                        f"(C + 7 digits), found {token.value!r}",
                        token.line, token.column)
            values = frozenset(t.value for t in cuis)
            if key.value == "allow":
                allow = values
            else:
                deny = values
        else:
            raise PatternSyntaxError(
                f"unknown node constraint {key.value!r}", key.line, key.column)
    parser.expect("punct", "}")
    return NodeConstraint(label=label, semtypes=semtypes,
                          require_supplement=require_supplement,
                          cui_allow=allow, cui_deny=deny)


def _parse_edge(parser: _Parser) -> tuple[EdgeConstraint, _Token]:
    from_token = parser.expect("ident")
    arrow = parser.take()
    if arrow.kind != "arrow":
        raise PatternSyntaxError(
            f"expected '->' or '<-', found {arrow.value or 'end of input'!r}",
            arrow.line, arrow.column)
    to_token = parser.expect("ident")
    parser.expect("punct", "{")
    key = parser.expect_keyword("pred")
    parser.expect("punct", ":")
    predicate_tokens = parser.ident_list()
    for token in predicate_tokens:
        if token.value not in PREDICATES:
            raise PatternSyntaxError(f"unknown predicate {token.value!r}",
                                     token.line, token.column)
    parser.expect("punct", "}")
    direction = DIRECTION_FORWARD if arrow.value == "->" else DIRECTION_REVERSE
    constraint = EdgeConstraint(
        from_label=from_token.value, to_label=to_token.value,
        predicates=frozenset(t.value for t in predicate_tokens),
        direction=direction)
    return constraint, from_token


def parse_pattern(text: str) -> PatternSpec:
    """Parse and validate one pattern definition."""
    parser = _Parser(_tokenize(text), text)
    parser.expect_keyword("pattern")
    name = parser.expect("ident").value
    parser.expect("punct", "{")

    nodes = []
    edges = []
    parser.expect_keyword("node")
    nodes.append(_parse_node(parser))
    while parser.peek().value != "}":
        keyword = parser.expect("ident")
        if keyword.value == "edge":
            constraint, token = _parse_edge(parser)
            if constraint.from_label != nodes[-1].label:
                raise PatternSyntaxError(
                    f"edge must start from the preceding node "
                    f"{nodes[-1].label!r}, found {constraint.from_label!r}",
                    token.line, token.column)
            edges.append(constraint)
            parser.expect_keyword("node")
            node = _parse_node(parser)
            if constraint.to_label != node.label:
                raise PatternSyntaxError(
                    f"edge points at {constraint.to_label!r} but the next "
                    f"node is {node.label!r}", token.line, token.column)
            nodes.append(node)
        else:
            raise PatternSyntaxError(
                f"expected 'edge' or '}}', found {keyword.value!r}",
                keyword.line, keyword.column)
    parser.expect("punct", "}")
    trailing = parser.peek()
    if trailing.kind != "eof":
        raise PatternSyntaxError(f"unexpected trailing {trailing.value!r}",
                                 trailing.line, trailing.column)
    return PatternSpec(name=name, nodes=tuple(nodes), edges=tuple(edges))


def load_builtin_pattern(name: str) -> PatternSpec:
    """Load one of the patterns shipped with the package (dsgd, dsgfgd)."""
    if name not in BUILTIN_PATTERNS:
        raise PatternError(
            f"unknown builtin pattern {name!r}; available: "
            + ", ".join(BUILTIN_PATTERNS))
    text = (resources.files("suppmine") / "data" / "patterns"
            / f"{name}.pattern").read_text(encoding="utf-8")
    return parse_pattern(text)
