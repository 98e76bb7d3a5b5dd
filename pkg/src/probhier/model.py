"""The stochastic refinement model over a type hierarchy: transition
probabilities on inheritance edges, structure scoring, bounded exhaustive
enumeration, and seeded sampling.

A structure grows from the root type by repeatedly picking a direct subtype
for some non-maximal node (paying that edge's transition probability) and
creating one child per feature introduced by the step.  A node created at
type T immediately receives one child per feature appropriate to T.  The
probability of a finished structure is the product over all refinement edges
implied by it; products are accumulated as correctly-rounded sums of logs
(math.fsum), which makes them exactly independent of expansion order.
"""

import math
import random
from collections import deque

from .errors import InputError, ModelError
from .fstruct import FeatureStructure, Node, serialize_fs

ROW_SUM_TOL = 1e-9
FILE_SUM_TOL = 1e-6


class Params:
    """Transition probabilities keyed (from_type, to_type), plus a per-maximal-
    type probability that a pairwise node comparison resolves to equality."""

    def __init__(self, transition, equate=None):
        self.transition = dict(transition)
        self.equate = dict(equate) if equate else {}
        self._rows = {}
        for (t, s), p in self.transition.items():
            self._rows.setdefault(t, {})[s] = p

    def row(self, from_type):
        return self._rows.get(from_type, {})

    def equate_prob(self, type_name):
        return self.equate.get(type_name, 0.0)

    def validate(self, sig, tol=ROW_SUM_TOL):
        for (t, s), p in self.transition.items():
            decl = sig.decl(t)
            if s not in decl.subtypes:
                raise ModelError(f"{s!r} is not a direct subtype of {t!r}")
            if not 0.0 <= p <= 1.0:
                raise ModelError(f"transition({t},{s}) = {p} out of [0,1]")
        for t in sig.non_maximal_types:
            row = self.row(t)
            missing = [s for s in sig.decl(t).subtypes if s not in row]
            if missing:
                raise ModelError(f"no transition probability for {t} => {missing[0]}")
            total = math.fsum(row.values())
            if abs(total - 1.0) > tol:
                raise ModelError(
                    f"transition probabilities for {t!r} sum to {total!r}, not 1")
        for t, q in self.equate.items():
            if not sig.is_maximal(t):
                raise ModelError(f"equate parameter on non-maximal type {t!r}")
            if not 0.0 <= q <= 1.0:
                raise ModelError(f"equate({t}) = {q} out of [0,1]")


def uniform_params(sig):
    """Equal probability across each type's direct subtypes; equate 0."""
    transition = {}
    for t in sig.non_maximal_types:
        subs = sig.decl(t).subtypes
        for s in subs:
            transition[(t, s)] = 1.0 / len(subs)
    return Params(transition)


def load_params(text, sig):
    """Parameter file: "trans FROM TO P" and "eq TYPE Q" lines, % comments.
    Every row must sum to 1 within 1e-6 (missing entries count as 0) and is
    renormalized to sum exactly."""
    transition = {}
    equate = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "trans" and len(fields) == 4:
            _, t, s, p = fields
            if t not in sig.decls or s not in sig.decls:
                raise InputError(f"unknown type in {line!r}", line=lineno)
            if s not in sig.decl(t).subtypes:
                raise InputError(
                    f"{s!r} is not a direct subtype of {t!r}", line=lineno)
            if (t, s) in transition:
                raise InputError(f"duplicate entry for {t} => {s}", line=lineno)
            transition[(t, s)] = _parse_prob(p, lineno)
        elif fields[0] == "eq" and len(fields) == 3:
            _, t, q = fields
            if t not in sig.decls:
                raise InputError(f"unknown type {t!r}", line=lineno)
            if not sig.is_maximal(t):
                raise InputError(
                    f"equate parameter on non-maximal type {t!r}", line=lineno)
            if t in equate:
                raise InputError(f"duplicate equate entry for {t!r}", line=lineno)
            equate[t] = _parse_prob(q, lineno)
        else:
            raise InputError(f"unrecognized line {line!r}", line=lineno)

    full = {}
    for t in sig.non_maximal_types:
        subs = sig.decl(t).subtypes
        row = {s: transition.get((t, s), 0.0) for s in subs}
        total = math.fsum(row.values())
        if abs(total - 1.0) > FILE_SUM_TOL:
            raise InputError(
                f"transition probabilities for {t!r} sum to {total!r}, not 1")
        for s in subs:
            full[(t, s)] = row[s] / total
    return Params(full, equate)


def save_params(params, sig):
    """Emit the parameter file format, rows in declaration order."""
    lines = []
    for t in sig.non_maximal_types:
        for s in sig.decl(t).subtypes:
            lines.append(f"trans {t} {s} {params.transition[(t, s)]:.12g}")
    for t in sig.maximal_types:
        lines.append(f"eq {t} {params.equate_prob(t):.12g}")
    return "\n".join(lines) + "\n"


def _parse_prob(text, lineno):
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"bad probability {text!r}", line=lineno) from None
    if not 0.0 <= value <= 1.0:
        raise InputError(f"probability {text!r} out of [0,1]", line=lineno)
    return value


# -- scoring -----------------------------------------------------------------


def _log(p):
    return math.log(p) if p > 0.0 else float("-inf")


def entry_type(sig, fs, path):
    """The type a node at the given feature path was created with: the root
    enters at the hierarchy root, every other node at the declared value type
    of the feature that introduced it."""
    if not path:
        return sig.root
    node = fs.root
    for feat in path[:-1]:
        node = node.children[feat]
    closure = dict(sig.appropriate_features(node.type))
    feat = path[-1]
    if feat not in closure:
        raise ModelError(f"feature {feat} not appropriate for {node.type}")
    return closure[feat]


def refinement_log_factors(params, sig, fs):
    """Log transition factors of every refinement edge implied by the
    structure, in a fixed pre-order walk.  Unexpanded class members (every
    member but the representative) contribute nothing."""
    factors = []
    for path, node in fs.nodes_preorder():
        cls = fs.class_of(node)
        if cls is not None and cls[0] is not node:
            continue
        start = entry_type(sig, fs, path)
        for t, s in sig.refinement_chain(start, node.type):
            factors.append(_log(params.transition[(t, s)]))
    return factors


def log_structure_probability(params, sig, fs):
    if not fs.is_maximally_specified(sig):
        raise ModelError("structure is not maximally specified")
    if fs.classes:
        raise ModelError(
            "structure has shared nodes; use the re-entrancy scorer")
    return math.fsum(refinement_log_factors(params, sig, fs))


def structure_probability(params, sig, fs):
    """Probability of a maximally specified structure with no shared nodes:
    the product of transition probabilities along every node's refinement
    chain from its entry type to its final type."""
    return math.exp(log_structure_probability(params, sig, fs))


# -- generation --------------------------------------------------------------


class BoundExceeded(Exception):
    """Internal: node creation overflowed the enumeration bound."""


def _create(sig, entry, created, limit=None):
    """Create a node entering at the given type, recursively sprouting one
    child per appropriate feature.  Every created node is appended to
    ``created``; raises BoundExceeded when the list outgrows ``limit``."""
    node = Node(entry)
    created.append(node)
    if limit is not None and len(created) > limit:
        raise BoundExceeded
    for feat, vtype in sig.appropriate_features(entry):
        node.children[feat] = _create(sig, vtype, created, limit)
    return node


def _sprout(sig, node, subtype, created, limit=None):
    """Refine node one step to subtype, creating one child subtree per
    feature introduced there."""
    node.type = subtype
    for feat, vtype in sorted(sig.decl(subtype).features):
        node.children[feat] = _create(sig, vtype, created, limit)


def _unsprout(sig, node, subtype, saved_type):
    node.type = saved_type
    for feat, _ in sig.decl(subtype).features:
        node.children.pop(feat, None)


def _copy_tree(node):
    return Node(node.type, {f: _copy_tree(c) for f, c in node.children.items()})


def enumerate_structures(params, sig, max_nodes):
    """All maximally specified structures of at most max_nodes nodes, with
    their probabilities, ordered by node count then canonical serialization.
    Also returns the residual mass 1 - sum(probabilities): the mass left on
    structures exceeding the bound.  Zero-probability branches are kept."""
    if max_nodes < 1:
        raise ModelError("max_nodes must be at least 1")
    params.validate(sig)
    results = []

    def expand(root, pending, count, logs):
        if not pending:
            fs = FeatureStructure(_copy_tree(root))
            results.append((count, math.exp(math.fsum(logs)), fs))
            return
        node = pending[0]
        from_type = node.type
        for s in sig.decl(from_type).subtypes:
            created = []
            try:
                _sprout(sig, node, s, created, limit=max_nodes - count)
            except BoundExceeded:
                _unsprout(sig, node, s, from_type)
                continue
            rest = ([node] if not sig.is_maximal(s) else []) + pending[1:]
            rest += [n for n in created if not sig.is_maximal(n.type)]
            logs.append(_log(params.transition[(from_type, s)]))
            expand(root, rest, count + len(created), logs)
            logs.pop()
            _unsprout(sig, node, s, from_type)

    created = []
    try:
        root = _create(sig, sig.root, created, limit=max_nodes)
    except BoundExceeded:
        return [], 1.0
    pending = [n for n in created if not sig.is_maximal(n.type)]
    expand(root, pending, len(created), [])

    results.sort(key=lambda item: (item[0], serialize_fs(item[2])))
    out = [(fs, p) for _, p, fs in results]
    residual = 1.0 - math.fsum(p for _, p in out)
    return out, residual


def sample_structure(params, sig, seed, max_steps=10000):
    """Draw one structure with a dedicated Mersenne Twister stream seeded by
    the given integer (random.Random).  Identical seeds give identical
    output.  Returns None when more than max_steps refinement draws would be
    needed (the budget-exceeded outcome)."""
    params.validate(sig)
    if sig.creation_size(sig.root) == math.inf:
        return None
    rng = random.Random(seed)
    created = []
    root = _create(sig, sig.root, created)
    pending = deque(n for n in created if not sig.is_maximal(n.type))
    steps = 0
    while pending:
        node = pending[0]
        subtype = _draw(rng, sig.decl(node.type).subtypes, params.row(node.type))
        steps += 1
        if steps > max_steps:
            return None
        if any(sig.creation_size(v) == math.inf
               for _, v in sig.decl(subtype).features):
            return None
        created = []
        _sprout(sig, node, subtype, created)
        if sig.is_maximal(node.type):
            pending.popleft()
        pending.extend(n for n in created if not sig.is_maximal(n.type))
    return FeatureStructure(root)


def _draw(rng, ordered_keys, row):
    r = rng.random()
    cum = 0.0
    last_positive = None
    for key in ordered_keys:
        p = row[key]
        if p > 0.0:
            last_positive = key
        cum += p
        if r < cum:
            return key
    if last_positive is None:
        raise ModelError("cannot draw from an all-zero probability row")
    return last_positive
