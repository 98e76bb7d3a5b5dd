"""Shared-node (re-entrant) structures: pairwise equate scoring, the
probability mass leaked onto non-transitive outcomes, rejection sampling of
legal structures, and estimation of the equate parameters.

Generation interleaves refinement with equivalence-class formation: whenever
a node reaches a maximal type t it is compared against every earlier node of
type t, equating with probability q_t and staying distinct with probability
1 - q_t, each comparison independent.  A node that joins an existing class is
never expanded; the class representative's subtree stands for it.  Because
the comparisons are independent, some outcome vectors describe no equivalence
relation at all (equal to two nodes that are themselves distinct); their mass
is the leaked mass, and the sampler discards such runs.

Scores are the raw products the pairwise scheme defines: refinement factors
for class representatives only, times q_t or (1 - q_t) per unordered
same-type node pair.  Forced comparisons (q exactly 0 or 1) consume no
randomness and are not branched over.
"""

import math
import random
from fractions import Fraction

from .errors import ModelError
from .fstruct import FeatureStructure, Node, serialize_fs
from .model import BoundExceeded, _draw, _log, refinement_log_factors


def _log_not(q):
    return float("-inf") if q >= 1.0 else math.log1p(-q)


def pair_log_factors(params, fs):
    """Log factors of every unordered pair of same-type nodes: log q_t when
    the pair shares a class, log(1 - q_t) otherwise."""
    by_type = {}
    for _, node in fs.nodes_bfs():
        by_type.setdefault(node.type, []).append(node)
    factors = []
    for t in sorted(by_type):
        nodes = by_type[t]
        if len(nodes) < 2:
            continue
        q = params.equate_prob(t)
        for i in range(len(nodes)):
            cls_i = fs.class_of(nodes[i])
            for j in range(i + 1, len(nodes)):
                same = cls_i is not None and cls_i is fs.class_of(nodes[j])
                factors.append(_log(q) if same else _log_not(q))
    return factors


def log_score_reentrant(params, sig, fs):
    if not fs.is_maximally_specified(sig):
        raise ModelError("structure is not maximally specified")
    factors = refinement_log_factors(params, sig, fs)
    factors.extend(pair_log_factors(params, fs))
    return math.fsum(factors)


def score_reentrant(params, sig, fs):
    """Raw probability the pairwise scheme assigns to a structure with an
    arbitrary node partition.  With all equate parameters 0 and a partition
    of singletons this equals structure_probability bit for bit."""
    return math.exp(log_score_reentrant(params, sig, fs))


def decision_split(parent_probability, q):
    """Split the mass of one pending equate/inequate comparison.

    Returns (equated, inequated) as exact rationals, so that
    equated + inequated == parent_probability holds exactly."""
    parent = Fraction(parent_probability)
    equated = parent * Fraction(q)
    return equated, parent - equated


# -- the generation run tree --------------------------------------------------


class _RunState:
    __slots__ = ("root", "pending", "registry", "cells", "mass", "count")

    def __init__(self, root, pending, registry, cells, mass, count):
        self.root = root
        self.pending = pending      # node paths awaiting processing, head first
        self.registry = registry    # maximal type -> decided node paths
        self.cells = cells          # partition cells (lists of paths)
        self.mass = mass
        self.count = count

    def clone(self):
        return _RunState(
            _copy(self.root),
            list(self.pending),
            {t: list(ps) for t, ps in self.registry.items()},
            [list(c) for c in self.cells],
            self.mass,
            self.count,
        )

    def node_at(self, path):
        node = self.root
        for feat in path:
            node = node.children[feat]
        return node

    def drop_subtree(self, path):
        """Remove the children of a joining node (it is never expanded) along
        with their pending entries."""
        node = self.node_at(path)
        removed = _size(node) - 1
        node.children = {}
        self.pending = [p for p in self.pending
                        if not (len(p) > len(path) and p[: len(path)] == path)]
        self.count -= removed

    def finish(self):
        mapping = {}
        root = _copy_with_paths(self.root, (), mapping)
        classes = [[mapping[p] for p in cell] for cell in self.cells
                   if len(cell) > 1]
        return FeatureStructure(root, classes)


def _copy(node):
    return Node(node.type, {f: _copy(c) for f, c in node.children.items()})


def _copy_with_paths(node, path, mapping):
    new = Node(node.type)
    mapping[path] = new
    for feat, child in node.children.items():
        new.children[feat] = _copy_with_paths(child, path + (feat,), mapping)
    return new


def _size(node):
    return 1 + sum(_size(c) for c in node.children.values())


def _build_entry(sig, entry, path, created, budget):
    """Create a node entering at a type, sprouting every appropriate feature;
    records (node, path) pairs in creation order."""
    node = Node(entry)
    created.append((node, path))
    if len(created) > budget:
        raise BoundExceeded
    for feat, vtype in sig.appropriate_features(entry):
        node.children[feat] = _build_entry(sig, vtype, path + (feat,), created,
                                           budget)
    return node


def _initial_state(sig, budget):
    created = []
    root = _build_entry(sig, sig.root, (), created, budget)
    return _RunState(root, [p for _, p in created], {}, [], 1.0, len(created))


def _sprout_paths(sig, node, subtype, path, created, budget):
    node.type = subtype
    for feat, vtype in sorted(sig.decl(subtype).features):
        node.children[feat] = _build_entry(sig, vtype, path + (feat,), created,
                                           budget)


def _type_cells(state, earlier):
    """Indices of the partition cells made of the given earlier nodes."""
    members = set(earlier)
    return [i for i, cell in enumerate(state.cells) if cell[0] in members]


def _decision_outcomes(state, t, q):
    """Legal continuations of the pending node's comparisons against the
    earlier type-t nodes, as (coin probability, cell index or None) pairs,
    plus the total probability of the non-transitive vectors.  Forced
    comparisons (q of exactly 0 or 1) are not branched over."""
    earlier = state.registry.get(t, [])
    k = len(earlier)
    if k == 0 or q == 0.0:
        return [(1.0, None)], 0.0
    cells = _type_cells(state, earlier)
    if q == 1.0:
        if len(cells) == 1 and len(state.cells[cells[0]]) == k:
            return [(1.0, cells[0])], 0.0
        return [], 1.0
    outcomes = [((1.0 - q) ** k, None)]
    for i in cells:
        c = len(state.cells[i])
        outcomes.append((q ** c * (1.0 - q) ** (k - c), i))
    legal = math.fsum(p for p, _ in outcomes)
    return outcomes, 1.0 - legal


def _run_tree(params, sig, max_nodes, emit):
    """Walk every generation run within the node bound.  Calls emit for each
    completed legal run; returns the (leaked, residual) masses."""
    params.validate(sig)
    leaked = 0.0
    residual = 0.0

    try:
        start = _initial_state(sig, max_nodes)
    except BoundExceeded:
        return 0.0, 1.0

    stack = [start]
    while stack:
        state = stack.pop()
        if not state.pending:
            emit(state)
            continue
        path = state.pending[0]
        node = state.node_at(path)
        if not sig.is_maximal(node.type):
            from_type = node.type
            for s in sig.decl(from_type).subtypes:
                branch = state.clone()
                branch.mass *= params.transition[(from_type, s)]
                created = []
                try:
                    _sprout_paths(sig, branch.node_at(path), s, path, created,
                                  max_nodes - branch.count)
                except BoundExceeded:
                    residual += branch.mass
                    continue
                branch.count += len(created)
                branch.pending = branch.pending + [p for _, p in created]
                stack.append(branch)
            continue

        t = node.type
        outcomes, illegal = _decision_outcomes(state, t, params.equate_prob(t))
        leaked += state.mass * illegal
        for coin, cell_index in outcomes:
            branch = state.clone()
            branch.mass *= coin
            branch.pending = branch.pending[1:]
            if cell_index is None:
                branch.cells.append([path])
            else:
                branch.drop_subtree(path)
                branch.cells[cell_index].append(path)
            branch.registry.setdefault(t, []).append(path)
            stack.append(branch)

    return leaked, residual


def leaked_mass(params, sig, max_nodes):
    """Total probability the pairwise comparison scheme puts on outcome
    vectors that describe no equivalence relation, over all runs within the
    node bound."""
    if max_nodes < 1:
        raise ModelError("max_nodes must be at least 1")
    leaked, _ = _run_tree(params, sig, max_nodes, lambda state: None)
    return leaked


def enumerate_reentrant(params, sig, max_nodes):
    """All legal structures the interleaved generation reaches within the
    node bound, scored with score_reentrant and ordered by node count then
    canonical serialization; plus the leaked and residual masses."""
    if max_nodes < 1:
        raise ModelError("max_nodes must be at least 1")
    collected = []

    def emit(state):
        collected.append((state.count, state.finish()))

    leaked, residual = _run_tree(params, sig, max_nodes, emit)
    collected.sort(key=lambda item: (item[0], serialize_fs(item[1])))
    out = [(fs, score_reentrant(params, sig, fs)) for _, fs in collected]
    return out, leaked, residual


def sample_reentrant(params, sig, seed, max_steps=10000, max_retries=1000):
    """Sample one legal structure by rejection: run the interleaved procedure
    and discard any run whose comparison vector is non-transitive, retrying
    with fresh draws from the same stream.  Returns None after max_retries
    rejections, or once a run needs more than max_steps refinement draws.
    With every equate parameter 0 the draws, and hence the output, match
    sample_structure exactly for equal seeds."""
    params.validate(sig)
    if sig.creation_size(sig.root) == math.inf:
        return None
    rng = random.Random(seed)
    for _ in range(max_retries + 1):
        outcome = _sample_once(params, sig, rng, max_steps)
        if outcome is None:
            return None
        fs, rejected = outcome
        if not rejected:
            return fs
    return None


def _sample_once(params, sig, rng, max_steps):
    state = _initial_state(sig, math.inf)
    steps = 0
    while state.pending:
        path = state.pending[0]
        node = state.node_at(path)
        if not sig.is_maximal(node.type):
            subtype = _draw(rng, sig.decl(node.type).subtypes,
                            params.row(node.type))
            steps += 1
            if steps > max_steps:
                return None
            if any(sig.creation_size(v) == math.inf
                   for _, v in sig.decl(subtype).features):
                return None
            created = []
            _sprout_paths(sig, node, subtype, path, created, math.inf)
            state.count += len(created)
            state.pending = state.pending + [p for _, p in created]
            continue

        t = node.type
        q = params.equate_prob(t)
        earlier = list(state.registry.get(t, []))
        equated = set()
        for other in earlier:
            if q == 0.0:
                decided = False
            elif q == 1.0:
                decided = True
            else:
                decided = rng.random() < q
            if decided:
                equated.add(other)
        state.pending = state.pending[1:]
        state.registry.setdefault(t, []).append(path)
        if not equated:
            state.cells.append([path])
            continue
        target = None
        for i in _type_cells(state, earlier):
            if set(state.cells[i]) == equated:
                target = i
                break
        if target is None:
            return None, True  # non-transitive vector: reject the run
        state.drop_subtree(path)
        state.cells[target].append(path)
    return state.finish(), False


def estimate_equate(corpus, sig, init=None):
    """Per-maximal-type relative frequency of equated pairs: structures'
    same-class unordered same-type pairs over all such pairs, weighted by
    multiplicity.  Types with no pairs keep their initial estimate (0 when
    no initial estimate is given)."""
    if not len(corpus):
        raise ModelError("empty corpus")
    same = {t: 0 for t in sig.maximal_types}
    total = {t: 0 for t in sig.maximal_types}
    for fs, mult in corpus:
        by_type = {}
        for _, node in fs.nodes_bfs():
            by_type.setdefault(node.type, []).append(node)
        for t, nodes in by_type.items():
            if t not in total or len(nodes) < 2:
                continue
            n = len(nodes)
            total[t] += mult * n * (n - 1) // 2
            for i in range(n):
                cls_i = fs.class_of(nodes[i])
                if cls_i is None:
                    continue
                for j in range(i + 1, n):
                    if cls_i is fs.class_of(nodes[j]):
                        same[t] += mult
    out = {}
    for t in sig.maximal_types:
        out[t] = same[t] / total[t] if total[t] else _init_q(init, t)
    return out


def _init_q(init, t):
    if init is None:
        return 0.0
    if hasattr(init, "equate_prob"):
        return init.equate_prob(t)
    return init.get(t, 0.0)
