"""Context-free baseline: rule-probability grammars over bracketed trees.

Grammar files carry one rule per line, "lhs -> rhs1 rhs2 ... [: p]"; either
every rule carries a probability or none does.  Treebank files carry one
bracketed tree per line, e.g. "(s (np (np-sing car)) (vp (vp-sing stops)))";
a bare token is a leaf, and leaves may be non-terminals (partial trees).
Tree probability is the product of the probabilities of the rules expanding
its internal nodes, accumulated as a correctly-rounded sum of logs, so it is
exactly independent of expansion order.
"""

import math
import re
from collections import Counter

from .errors import InputError, ModelError
from .model import FILE_SUM_TOL, ROW_SUM_TOL, _log
from .train import FitResult, fit_conditional

_TREE_TOKEN_RE = re.compile(r"[()]|[^()\s]+")


class Tree:
    """An ordered tree of symbols; leaves have an empty child tuple."""

    __slots__ = ("label", "children")

    def __init__(self, label, children=()):
        self.label = label
        self.children = tuple(children)

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return self.label == other.label and self.children == other.children

    def __hash__(self):
        return hash((self.label, self.children))

    def __repr__(self):
        return f"Tree({serialize_tree(self)!r})"


def parse_tree(text):
    tokens = _TREE_TOKEN_RE.findall(text)
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise InputError("unexpected end of tree")
        tok = tokens[pos]
        pos += 1
        if tok != "(":
            if tok == ")":
                raise InputError("unexpected ')' in tree")
            return Tree(tok)
        if pos >= len(tokens) or tokens[pos] in "()":
            raise InputError("expected a node label after '('")
        label = tokens[pos]
        pos += 1
        children = []
        while pos < len(tokens) and tokens[pos] != ")":
            children.append(parse())
        if pos >= len(tokens):
            raise InputError("missing ')' in tree")
        pos += 1
        return Tree(label, children)

    try:
        tree = parse()
    except RecursionError:
        raise InputError("tree is nested too deeply") from None
    if pos != len(tokens):
        raise InputError("trailing input after tree")
    return tree


def serialize_tree(tree):
    if not tree.children:
        return tree.label
    inner = " ".join(serialize_tree(c) for c in tree.children)
    return f"({tree.label} {inner})"


def parse_treebank(text):
    """One bracketed tree per line; blank lines and % comments ignored."""
    trees = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        try:
            trees.append(parse_tree(line))
        except InputError as exc:
            raise InputError(exc.message, line=lineno) from None
    return trees


class Pcfg:
    """Rules per non-terminal in declaration order, with an optional
    probability table (rows summing to one)."""

    def __init__(self, rules, probs=None, start=None):
        self.rules = [(lhs, tuple(rhs)) for lhs, rhs in rules]
        if not self.rules:
            raise InputError("grammar has no rules")
        self.start = start if start is not None else self.rules[0][0]
        self.probs = dict(probs) if probs is not None else None
        self.nonterminals = {lhs for lhs, _ in self.rules}
        self.terminals = {sym for _, rhs in self.rules for sym in rhs
                          if sym not in self.nonterminals}
        self._by_lhs = {}
        for lhs, rhs in self.rules:
            self._by_lhs.setdefault(lhs, []).append(rhs)
        if self.probs is not None:
            self.validate_probs()

    def expansions(self, lhs):
        return self._by_lhs.get(lhs, [])

    def validate_probs(self, tol=ROW_SUM_TOL):
        if self.probs is None:
            raise ModelError("grammar carries no rule probabilities")
        for rule in self.rules:
            if rule not in self.probs:
                raise ModelError(f"no probability for rule {_rule_str(rule)}")
            if not 0.0 <= self.probs[rule] <= 1.0:
                raise ModelError(f"probability of {_rule_str(rule)} out of [0,1]")
        for lhs in self._by_lhs:
            total = math.fsum(self.probs[(lhs, rhs)] for rhs in self._by_lhs[lhs])
            if abs(total - 1.0) > tol:
                raise ModelError(
                    f"rule probabilities for {lhs!r} sum to {total!r}, not 1")

    def with_probs(self, probs):
        return Pcfg(self.rules, probs, self.start)


def _rule_str(rule):
    lhs, rhs = rule
    return f"{lhs} -> {' '.join(rhs)}"


def parse_grammar(text):
    """Parse the grammar file format; probability annotations must be given
    on every rule or on none, and annotated rows are renormalized after a
    1e-6 sum check."""
    rules = []
    probs = {}
    annotated = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < 3 or fields[1] != "->":
            raise InputError(f"unrecognized rule line {line!r}", line=lineno)
        lhs = fields[0]
        rhs = fields[2:]
        p = None
        if len(rhs) >= 2 and rhs[-2] == ":":
            try:
                p = float(rhs[-1])
            except ValueError:
                raise InputError(
                    f"bad probability {rhs[-1]!r}", line=lineno) from None
            if not 0.0 <= p <= 1.0:
                raise InputError(f"probability {p!r} out of [0,1]", line=lineno)
            rhs = rhs[:-2]
        if not rhs:
            raise InputError("rule has an empty right-hand side", line=lineno)
        rule = (lhs, tuple(rhs))
        if any(r == rule for r in rules):
            raise InputError(f"duplicate rule {_rule_str(rule)}", line=lineno)
        rules.append(rule)
        if p is not None:
            probs[rule] = p
            annotated += 1

    if annotated and annotated != len(rules):
        raise InputError(
            "either every rule must carry a probability or none may")
    if not annotated:
        return Pcfg(rules)

    by_lhs = {}
    for lhs, rhs in rules:
        by_lhs.setdefault(lhs, []).append(rhs)
    for lhs, rhss in by_lhs.items():
        total = math.fsum(probs[(lhs, rhs)] for rhs in rhss)
        if abs(total - 1.0) > FILE_SUM_TOL:
            raise InputError(
                f"rule probabilities for {lhs!r} sum to {total!r}, not 1")
        for rhs in rhss:
            probs[(lhs, rhs)] /= total
    return Pcfg(rules, probs)


def serialize_grammar(g):
    lines = []
    for rule in g.rules:
        lhs, rhs = rule
        line = f"{lhs} -> {' '.join(rhs)}"
        if g.probs is not None:
            line += f" : {g.probs[rule]:.12g}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def uniform_rule_probs(g):
    """Equal probability across each non-terminal's rules."""
    probs = {}
    for lhs, rhs in g.rules:
        probs[(lhs, rhs)] = 1.0 / len(g.expansions(lhs))
    return probs


def _check_tree(g, tree):
    known = set(g.rules)
    def visit(node):
        if node.children:
            rule = (node.label, tuple(c.label for c in node.children))
            if rule not in known:
                raise ModelError(f"no rule covers node {_rule_str(rule)}")
            for child in node.children:
                visit(child)
        elif node.label not in g.nonterminals and node.label not in g.terminals:
            raise ModelError(f"unknown symbol {node.label!r}")
    visit(tree)


def tree_rule_counts(tree):
    counts = Counter()

    def visit(node):
        if node.children:
            counts[(node.label, tuple(c.label for c in node.children))] += 1
            for child in node.children:
                visit(child)

    visit(tree)
    return counts


def log_tree_probability(g, tree):
    if tree.label != g.start:
        raise ModelError(
            f"tree root {tree.label!r} is not the start symbol {g.start!r}")
    if g.probs is None:
        raise ModelError("grammar carries no rule probabilities")
    _check_tree(g, tree)
    logs = []

    def visit(node):
        if node.children:
            logs.append(_log(g.probs[(node.label,
                                      tuple(c.label for c in node.children))]))
            for child in node.children:
                visit(child)

    visit(tree)
    return math.fsum(logs)


def tree_probability(g, tree):
    """Product of the probabilities of the rules expanding the tree's
    internal nodes; exactly independent of expansion order."""
    return math.exp(log_tree_probability(g, tree))


def train_pcfg(g, treebank, estimator="count", init=None, support=None,
               tol=1e-9, max_iters=10000):
    """Estimate rule probabilities from a treebank.

    ``count`` is relative frequency per non-terminal, rows never expanded
    keeping their initial values.  ``conditional`` maximizes the likelihood
    renormalized over the given support trees (every treebank tree must occur
    in the support).  Returns a FitResult whose params field is the trained
    probability table."""
    if not treebank:
        raise ModelError("empty treebank")
    for i, tree in enumerate(treebank, start=1):
        if tree.label != g.start:
            raise ModelError(
                f"treebank tree {i} is not rooted at the start symbol")
        _check_tree(g, tree)
    if init is None:
        init = g.probs if g.probs is not None else uniform_rule_probs(g)

    if estimator == "count":
        counts = Counter()
        for tree in treebank:
            counts.update(tree_rule_counts(tree))
        probs = {}
        for lhs, rhss in g._by_lhs.items():
            total = sum(counts.get((lhs, rhs), 0) for rhs in rhss)
            for rhs in rhss:
                if total > 0:
                    probs[(lhs, rhs)] = counts.get((lhs, rhs), 0) / total
                else:
                    probs[(lhs, rhs)] = init[(lhs, rhs)]
        return FitResult(probs)

    if estimator == "conditional":
        if not support:
            raise ModelError("the conditional estimator needs a support set")
        for i, tree in enumerate(support, start=1):
            if tree.label != g.start:
                raise ModelError(
                    f"support tree {i} is not rooted at the start symbol")
            _check_tree(g, tree)
        support_set = set(support)
        for i, tree in enumerate(treebank, start=1):
            if tree not in support_set:
                raise ModelError(
                    f"treebank tree {i} does not occur in the support set")
        weighted = Counter(treebank)
        corpus_items = [(tree_rule_counts(t), w) for t, w in weighted.items()]
        support_items = [tree_rule_counts(t) for t in support]
        rows = {lhs: [(lhs, rhs) for rhs in rhss]
                for lhs, rhss in g._by_lhs.items()}
        return fit_conditional(rows, init, corpus_items, support_items,
                               tol=tol, max_iters=max_iters)

    raise ModelError(f"unknown estimator {estimator!r}")
