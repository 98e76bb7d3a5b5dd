"""Typed feature structures: a node tree plus an equivalence relation over
maximal-type nodes, with a bracketed text format carrying re-entrancy tags.

    (sentence (left (np (num sing))) (right (vp (num sing))))
    (sentence (left (np (num #1=(sing)))) (right (vp (num #1))))

A child whose node has no children may be written as a bare type name.
Within one equivalence class only the representative (the class member that
comes first in the canonical breadth-first node order) carries children;
the other members are unexpanded references.
"""

import re
from dataclasses import dataclass

from .errors import InputError, ModelError

_FS_TOKEN_RE = re.compile(r"[a-z][a-zA-Z0-9_]*|#[0-9]+|[()=]|\S")
_NAME_RE = re.compile(r"[a-z][a-zA-Z0-9_]*\Z")
_MULT_RE = re.compile(r"(\d+)\s*x\s+(.*)\Z")


class Node:
    """A typed node; children maps feature name to child node."""

    __slots__ = ("type", "children")

    def __init__(self, type, children=None):
        self.type = type
        self.children = {} if children is None else dict(children)

    def __repr__(self):
        return f"Node({self.type!r}, {sorted(self.children)})"


class FeatureStructure:
    """A node tree plus equivalence classes over its nodes.

    ``classes`` holds only the non-singleton classes, each a list of member
    nodes; every other node is implicitly a singleton.  On construction the
    expanded subtree of each class is normalized onto its representative.
    """

    def __init__(self, root, classes=()):
        self.root = root
        self._classes = [list(c) for c in classes]
        self._normalize()

    # -- traversal --------------------------------------------------------

    def nodes_preorder(self):
        """(path, node) pairs, depth-first, children in feature-name order."""
        out = []

        def visit(path, node):
            out.append((path, node))
            for feat in sorted(node.children):
                visit(path + (feat,), node.children[feat])

        visit((), self.root)
        return out

    def nodes_bfs(self):
        """(path, node) pairs in canonical creation order: breadth-first,
        children in feature-name order."""
        out = []
        queue = [((), self.root)]
        while queue:
            path, node = queue.pop(0)
            out.append((path, node))
            for feat in sorted(node.children):
                queue.append((path + (feat,), node.children[feat]))
        return out

    def node_count(self):
        return len(self.nodes_preorder())

    @property
    def classes(self):
        return [list(c) for c in self._classes]

    def class_of(self, node):
        """The equivalence class containing node, or None if singleton."""
        for cls in self._classes:
            if any(m is node for m in cls):
                return cls
        return None

    def representative(self, node):
        """The expanded member standing for node's class (node itself when
        singleton)."""
        cls = self.class_of(node)
        return node if cls is None else cls[0]

    # -- construction helpers ----------------------------------------------

    def _normalize(self):
        order = {id(node): i for i, (_, node) in enumerate(self.nodes_bfs())}
        seen = set()
        for cls in self._classes:
            if len(cls) < 2:
                raise ModelError("equivalence classes must have two or more members")
            for member in cls:
                if id(member) not in order:
                    raise ModelError("class member is not a node of the structure")
                if id(member) in seen:
                    raise ModelError("node assigned to two equivalence classes")
                seen.add(id(member))
            cls.sort(key=lambda n: order[id(n)])
            expanded = [m for m in cls if m.children]
            if len(expanded) > 1:
                raise ModelError("more than one member of a class is expanded")
            if expanded and expanded[0] is not cls[0]:
                cls[0].children = expanded[0].children
                expanded[0].children = {}

    @classmethod
    def from_equations(cls, root, pairs):
        """Build a structure from pairwise node equations.  The pairs are
        accepted only when they are already transitively closed; anything
        else is not representable as an equivalence relation."""
        groups = []
        for a, b in pairs:
            if a is b:
                continue
            ga = next((g for g in groups if any(m is a for m in g)), None)
            gb = next((g for g in groups if any(m is b for m in g)), None)
            if ga is None and gb is None:
                groups.append([a, b])
            elif ga is None:
                gb.append(a)
            elif gb is None:
                ga.append(b)
            elif ga is not gb:
                ga.extend(gb)
                groups.remove(gb)
        given = {frozenset((id(a), id(b))) for a, b in pairs if a is not b}
        for g in groups:
            for i in range(len(g)):
                for j in range(i + 1, len(g)):
                    if frozenset((id(g[i]), id(g[j]))) not in given:
                        raise ModelError(
                            "pairwise equations are not transitively closed")
        return cls(root, groups)

    # -- identity -----------------------------------------------------------

    def clone(self):
        mapping = {}

        def copy(node):
            new = Node(node.type, {f: copy(c) for f, c in node.children.items()})
            mapping[id(node)] = new
            return new

        root = copy(self.root)
        classes = [[mapping[id(m)] for m in cls] for cls in self._classes]
        return FeatureStructure(root, classes)

    def __eq__(self, other):
        if not isinstance(other, FeatureStructure):
            return NotImplemented
        return serialize_fs(self) == serialize_fs(other)

    def __hash__(self):
        return hash(serialize_fs(self))

    def __repr__(self):
        return f"FeatureStructure({serialize_fs(self)!r})"

    def is_maximally_specified(self, sig):
        return all(sig.is_maximal(n.type) for _, n in self.nodes_preorder())


def _path_str(path):
    return "/" + "/".join(path)


def well_typed(fs, sig):
    """Diagnostics (strings with node paths) for every violation of
    well-typedness against the signature.  Empty means well-typed."""
    diags = []
    for path, node in fs.nodes_preorder():
        where = _path_str(path)
        if node.type not in sig.decls:
            diags.append(f"{where}: unknown type {node.type!r}")
            continue
        cls = fs.class_of(node)
        if cls is not None and cls[0] is not node:
            continue  # unexpanded reference; the representative is checked
        expected = dict(sig.appropriate_features(node.type))
        for feat in sorted(node.children):
            if feat not in expected:
                diags.append(
                    f"{where}: feature {feat} not appropriate for {node.type}")
        for feat, vtype in sorted(expected.items()):
            if feat not in node.children:
                diags.append(
                    f"{where}: feature {feat} appropriate to {node.type} is missing")
                continue
            child = node.children[feat]
            if child.type in sig.decls and not sig.descends_from(child.type, vtype):
                diags.append(
                    f"{where}/{feat}: type {child.type} is not a refinement of "
                    f"{vtype}, the value type of {feat}")

    for i, cls in enumerate(fs.classes):
        types = {m.type for m in cls}
        if len(types) > 1:
            diags.append(f"class #{i + 1}: class mixes maximal types "
                         f"({', '.join(sorted(types))})")
        else:
            t = cls[0].type
            if t in sig.decls and not sig.is_maximal(t):
                diags.append(f"class #{i + 1}: type {t} is not maximal")
    return diags


# -- parsing ---------------------------------------------------------------


def _tokenize_fs(text):
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        for m in _FS_TOKEN_RE.finditer(line):
            tokens.append((m.group(), lineno, m.start() + 1))
    return tokens


class _FsParser:
    def __init__(self, text):
        self.tokens = _tokenize_fs(text)
        self.pos = 0
        self.tags = {}           # tag -> defined node
        self.members = {}        # tag -> [nodes]

    def fail(self, message):
        if self.pos < len(self.tokens):
            _, line, col = self.tokens[self.pos]
        elif self.tokens:
            _, line, col = self.tokens[-1]
        else:
            line, col = 1, 1
        raise InputError(message, line=line, col=col)

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def next(self, expect=None):
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of input")
        if expect is not None and tok != expect:
            self.fail(f"expected {expect!r}, found {tok!r}")
        self.pos += 1
        return tok

    def parse(self):
        node = self.fs(allow_bare=True)
        if self.peek() is not None:
            self.fail(f"trailing input {self.peek()!r}")
        return node

    def fs(self, allow_bare=False):
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of input")
        if tok.startswith("#"):
            tag = self.next()
            if self.peek() == "=":
                self.next("=")
                if tag in self.tags:
                    self.fail(f"tag {tag} defined twice")

                def register(node, tag=tag):
                    # visible to references inside its own body
                    self.tags[tag] = node
                    self.members.setdefault(tag, []).insert(0, node)

                return self.inner(register)
            if tag not in self.tags:
                self.fail(f"tag {tag} referenced before its definition")
            node = Node(self.tags[tag].type)
            self.members[tag].append(node)
            return node
        if tok == "(":
            return self.inner()
        if allow_bare and _NAME_RE.match(tok):
            return Node(self.next())
        self.fail(f"expected a feature structure, found {tok!r}")

    def inner(self, register=None):
        self.next("(")
        if not _NAME_RE.match(self.peek() or ""):
            self.fail(f"expected a type name, found {self.peek()!r}")
        node = Node(self.next())
        if register is not None:
            register(node)
        while self.peek() == "(":
            self.next("(")
            if not _NAME_RE.match(self.peek() or ""):
                self.fail(f"expected a feature name, found {self.peek()!r}")
            feat = self.next()
            if feat in node.children:
                self.fail(f"feature {feat} given twice on a {node.type} node")
            node.children[feat] = self.fs(allow_bare=True)
            self.next(")")
        self.next(")")
        return node


def parse_fs(text, sig):
    """Parse one feature structure and check it against the signature.

    Raises InputError for syntax problems, tag misuse, or any well-typedness
    violation (unknown types, inappropriate or missing features, incompatible
    value types, classes over non-maximal types)."""
    parser = _FsParser(text)
    try:
        root = parser.parse()
        classes = [nodes for nodes in parser.members.values() if len(nodes) > 1]
        fs = FeatureStructure(root, classes)
        diags = well_typed(fs, sig)
    except RecursionError:
        raise InputError("structure is nested too deeply") from None
    if diags:
        raise InputError("; ".join(diags))
    return fs


def serialize_fs(fs):
    """Canonical text: children in feature-name order, shared nodes tagged
    #1, #2, ... in order of first occurrence, childless non-root nodes bare."""
    numbers = {}
    rep = {}
    for i, cls in enumerate(fs.classes):
        for m in cls:
            numbers[id(m)] = cls
            rep[id(m)] = cls[0]

    assigned = {}

    def render(node, at_root):
        cls = numbers.get(id(node))
        if cls is not None:
            key = id(cls[0])
            if key in assigned:
                return f"#{assigned[key]}"
            assigned[key] = len(assigned) + 1
            return f"#{assigned[key]}=" + plain(rep[id(node)], node.type)
        if not node.children and not at_root:
            return node.type
        return plain(node, node.type)

    def plain(node, type_name):
        parts = [type_name]
        for feat in sorted(node.children):
            parts.append(f"({feat} {render(node.children[feat], False)})")
        return "(" + " ".join(parts) + ")"

    return render(fs.root, True)


# -- corpora -----------------------------------------------------------------


@dataclass
class Corpus:
    """Weighted list of feature structures."""

    entries: list

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def total_weight(self):
        return sum(mult for _, mult in self.entries)


def parse_corpus(text, sig):
    """One structure per line, optionally prefixed "N x " for multiplicity.
    Blank lines and % comments are ignored."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        mult = 1
        m = _MULT_RE.match(line)
        if m:
            mult = int(m.group(1))
            line = m.group(2)
        if mult < 1:
            raise InputError("multiplicity must be a positive integer", line=lineno)
        try:
            fs = parse_fs(line, sig)
        except InputError as exc:
            raise InputError(exc.message, line=lineno, col=exc.col) from None
        entries.append((fs, mult))
    return Corpus(entries)


def serialize_corpus(corpus):
    lines = []
    for fs, mult in corpus:
        prefix = f"{mult} x " if mult != 1 else ""
        lines.append(prefix + serialize_fs(fs))
    return "\n".join(lines) + "\n"
