"""Type signatures: a single-inheritance hierarchy plus appropriateness
declarations, and the introduction relations derived from them.

The text format is one clause per type:

    bot sub [sign,num].
    sign sub [sentence,phrase].
    sentence sub [] intro [left:np,right:vp].

``sub`` lists the direct subtypes of the declared type (empty for maximal
types); ``intro`` lists the features introduced at that type, each with its
value type.  Whitespace between tokens is insignificant and ``%`` starts a
comment running to end of line.  The root must be declared as ``bot``.
"""

import math
import re
from dataclasses import dataclass

from .errors import InputError, ModelError

_TOKEN_RE = re.compile(r"[a-z][a-zA-Z0-9_]*|[\[\],:.]|\S")
_NAME_RE = re.compile(r"[a-z][a-zA-Z0-9_]*\Z")

ROOT_NAME = "bot"


@dataclass(frozen=True)
class TypeDecl:
    """One declared type: its parent, direct subtypes and introduced features,
    all in declaration order."""

    name: str
    parent: str | None
    subtypes: tuple[str, ...]
    features: tuple[tuple[str, str], ...]  # (feature, value type)


@dataclass(frozen=True)
class IntroductionRelation:
    """A refinement edge (from_type => to_type) together with the multiset of
    value types introduced at to_type (stored in feature-name order)."""

    from_type: str
    to_type: str
    introduced: tuple[str, ...]


class Signature:
    """Immutable view of a validated hierarchy.

    ``decls`` maps type name to TypeDecl in declaration order; the root is
    always ``bot``.  Construction validates single inheritance, reachability
    and appropriateness (no feature introduced twice on any inheritance chain,
    all value types declared).
    """

    def __init__(self, decls):
        self.decls = dict(decls)
        self.root = ROOT_NAME
        self._validate()
        self._closure = {}
        for name in self.decls:
            self._closure[name] = self._compute_closure(name)
        self._creation_size = {}

    # -- validation -----------------------------------------------------

    def _validate(self):
        if ROOT_NAME not in self.decls:
            raise InputError(f"missing root type {ROOT_NAME!r}")
        parents = {}
        for decl in self.decls.values():
            for sub in decl.subtypes:
                if sub not in self.decls:
                    raise InputError(
                        f"unknown type {sub!r} referenced as subtype of {decl.name!r}")
                if sub in parents:
                    raise InputError(
                        f"type {sub!r} declared as subtype of both "
                        f"{parents[sub]!r} and {decl.name!r}; "
                        "multiple inheritance is not supported")
                parents[sub] = decl.name
        if ROOT_NAME in parents:
            raise InputError(f"root type {ROOT_NAME!r} may not have a supertype")
        for decl in self.decls.values():
            for feat, vtype in decl.features:
                if vtype not in self.decls:
                    raise InputError(
                        f"unknown type {vtype!r} as value of feature "
                        f"{feat!r} on {decl.name!r}")

        # Walk the subtype relation from the root: this both establishes
        # reachability and checks that no feature is introduced twice along
        # any root-to-type inheritance chain.
        visited = set()

        def walk(name, seen):
            visited.add(name)
            feats = dict(seen)
            for feat, _ in self.decls[name].features:
                if feat in feats:
                    raise InputError(
                        f"feature {feat!r} introduced at both {feats[feat]!r} "
                        f"and {name!r} on one inheritance chain")
                feats[feat] = name
            for sub in self.decls[name].subtypes:
                walk(sub, feats)

        walk(ROOT_NAME, {})
        for name in self.decls:
            if name not in visited:
                raise InputError(
                    f"type {name!r} is not reachable from {ROOT_NAME!r}")

    def _compute_closure(self, name):
        feats = []
        for ancestor in self.path_from_root(name):
            feats.extend(self.decls[ancestor].features)
        return tuple(sorted(feats))

    # -- basic queries ----------------------------------------------------

    @property
    def types(self):
        return tuple(self.decls)

    def decl(self, name):
        try:
            return self.decls[name]
        except KeyError:
            raise ModelError(f"unknown type {name!r}") from None

    def is_maximal(self, name):
        return not self.decl(name).subtypes

    @property
    def maximal_types(self):
        return tuple(t for t in self.decls if not self.decls[t].subtypes)

    @property
    def non_maximal_types(self):
        return tuple(t for t in self.decls if self.decls[t].subtypes)

    def path_from_root(self, name):
        """Inheritance chain [bot, ..., name]."""
        chain = []
        cur = self.decl(name).name
        while cur is not None:
            chain.append(cur)
            cur = self.decls[cur].parent
        return list(reversed(chain))

    def descends_from(self, sub, sup):
        """True if sub == sup or sup is a proper ancestor of sub."""
        return sup in self.path_from_root(sub)

    def refinement_chain(self, from_type, to_type):
        """The edges [(T0,T1), (T1,T2), ...] refining from_type into to_type;
        empty when the two coincide."""
        path = self.path_from_root(to_type)
        if from_type not in path:
            raise ModelError(
                f"{to_type!r} is not a refinement of {from_type!r}")
        tail = path[path.index(from_type):]
        return list(zip(tail, tail[1:]))

    def appropriate_features(self, name):
        """All features usable on a node of the given type (introduced at the
        type or any ancestor), sorted by feature name."""
        self.decl(name)
        return self._closure[name]

    def creation_size(self, name):
        """Number of nodes created when a node enters at the given type and
        every appropriate feature recursively receives a fresh value node;
        math.inf when the appropriateness graph recurses and creation would
        never terminate."""
        self.decl(name)

        def size(t, active):
            if t in self._creation_size:
                return self._creation_size[t]
            if t in active:
                return math.inf
            active.add(t)
            total = 1
            for _, vtype in self.appropriate_features(t):
                sub = size(vtype, active)
                total = math.inf if sub == math.inf else total + sub
            active.discard(t)
            self._creation_size[t] = total
            return total

        return size(name, set())

    def maximal_descendants(self, name):
        """Maximal types in the subtree rooted at name, in declaration order."""
        out = []

        def visit(t):
            if not self.decls[t].subtypes:
                out.append(t)
            for sub in self.decls[t].subtypes:
                visit(sub)

        visit(self.decl(name).name)
        return tuple(out)


def _tokenize(text):
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("%", 1)[0]
        for m in _TOKEN_RE.finditer(line):
            tokens.append((m.group(), lineno, m.start() + 1))
    return tokens


class _TokenStream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def where(self):
        if self.pos < len(self.tokens):
            _, line, col = self.tokens[self.pos]
            return line, col
        if self.tokens:
            _, line, col = self.tokens[-1]
            return line, col
        return 1, 1

    def fail(self, message):
        line, col = self.where()
        raise InputError(message, line=line, col=col)

    def next(self, expect=None):
        if self.pos >= len(self.tokens):
            self.fail("unexpected end of input"
                      if expect is None else f"expected {expect!r} at end of input")
        tok, _, _ = self.tokens[self.pos]
        if expect is not None and tok != expect:
            self.fail(f"expected {expect!r}, found {tok!r}")
        self.pos += 1
        return tok

    def name(self, what):
        tok = self.peek()
        if tok is None or not _NAME_RE.match(tok):
            self.fail(f"expected {what}, found {tok!r}")
        return self.next()


def parse_signature(text):
    """Parse signature source into a validated Signature."""
    ts = _TokenStream(_tokenize(text))
    decls = {}
    order = []
    while ts.peek() is not None:
        name = ts.name("type name")
        ts.next("sub")
        ts.next("[")
        subtypes = []
        if ts.peek() != "]":
            subtypes.append(ts.name("subtype name"))
            while ts.peek() == ",":
                ts.next(",")
                subtypes.append(ts.name("subtype name"))
        ts.next("]")
        features = []
        if ts.peek() == "intro":
            ts.next("intro")
            ts.next("[")
            while True:
                feat = ts.name("feature name")
                ts.next(":")
                vtype = ts.name("value type name")
                if any(f == feat for f, _ in features):
                    ts.fail(f"feature {feat!r} declared twice on {name!r}")
                features.append((feat, vtype))
                if ts.peek() != ",":
                    break
                ts.next(",")
            ts.next("]")
        ts.next(".")
        if name in decls:
            raise InputError(f"duplicate declaration of type {name!r}")
        if len(set(subtypes)) != len(subtypes):
            raise InputError(f"type {name!r} lists a subtype twice")
        decls[name] = (tuple(subtypes), tuple(features))
        order.append(name)

    parents = {}
    for name in order:
        for sub in decls[name][0]:
            parents.setdefault(sub, name)
    full = {
        name: TypeDecl(name, parents.get(name), decls[name][0], decls[name][1])
        for name in order
    }
    try:
        return Signature(full)
    except RecursionError:
        raise InputError("hierarchy is nested too deeply") from None


def serialize_signature(sig):
    """Re-emit canonical signature source (declaration order preserved)."""
    lines = []
    for decl in sig.decls.values():
        line = f"{decl.name} sub [{','.join(decl.subtypes)}]"
        if decl.features:
            feats = ",".join(f"{f}:{v}" for f, v in decl.features)
            line += f" intro [{feats}]"
        lines.append(line + ".")
    return "\n".join(lines) + "\n"


def introduction_relations(sig):
    """One relation per (non-maximal type, direct subtype) pair.  The
    introduced multiset holds the value types of the features declared at
    the subtype, ordered by feature name."""
    out = []
    for decl in sig.decls.values():
        for sub in decl.subtypes:
            feats = sorted(sig.decls[sub].features)
            out.append(IntroductionRelation(
                decl.name, sub, tuple(v for _, v in feats)))
    return out


def iterated_introductions(sig, from_type):
    """For each maximal type reachable from from_type, the full multiset of
    value types a node carries once refined to it (one child per feature
    appropriate to the maximal type)."""
    out = []
    for t in sig.maximal_descendants(from_type):
        out.append((t, tuple(v for _, v in sig.appropriate_features(t))))
    return out
