"""Parameter estimation from corpora of maximally specified structures.

Two estimators are exposed.  ``count`` is plain relative frequency over the
refinement edges observed in the corpus; rows never observed keep their
initial estimates.  ``conditional`` maximizes the likelihood of the corpus
renormalized over an explicit, finite support set of admissible structures:

    sum_i w_i * log( P(x_i) / sum_{s in support} P(s) )

which differs from relative frequency whenever the support excludes some
structures the model can generate.  The optimizer is a multiplicative
per-row ascent with renormalization and backtracking, so the objective is
non-decreasing at every iteration; the contract is the fixed point reached,
not the path to it.
"""

import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import InputError, ModelError
from .fstruct import serialize_fs, well_typed
from .model import Params, entry_type


def structure_edge_counts(fs, sig):
    """Refinement edges implied by a structure, with multiplicities.
    Unexpanded class members contribute nothing."""
    counts = Counter()
    for path, node in fs.nodes_preorder():
        cls = fs.class_of(node)
        if cls is not None and cls[0] is not node:
            continue
        start = entry_type(sig, fs, path)
        for edge in sig.refinement_chain(start, node.type):
            counts[edge] += 1
    return counts


def count_transitions(corpus, sig):
    """Edge counts over the corpus, weighted by multiplicity; every edge of
    the signature appears (zero counts included)."""
    counts = {}
    for t in sig.non_maximal_types:
        for s in sig.decl(t).subtypes:
            counts[(t, s)] = 0
    for index, (fs, mult) in enumerate(corpus, start=1):
        diags = well_typed(fs, sig)
        if diags:
            raise InputError(f"corpus entry {index}: {diags[0]}")
        if not fs.is_maximally_specified(sig):
            raise InputError(f"corpus entry {index} is not maximally specified")
        for edge, n in structure_edge_counts(fs, sig).items():
            counts[edge] += mult * n
    return counts


def estimate(counts, init):
    """Relative-frequency transition table.  Rows with a zero total are
    copied from the initial estimates unchanged."""
    rows = {}
    for (t, s) in init.transition:
        rows.setdefault(t, []).append(s)
    transition = {}
    for t, subs in rows.items():
        total = sum(counts.get((t, s), 0) for s in subs)
        for s in subs:
            if total > 0:
                transition[(t, s)] = counts.get((t, s), 0) / total
            else:
                transition[(t, s)] = init.transition[(t, s)]
    return Params(transition, init.equate)


def format_counts(counts):
    """The counts dump format: one "count FROM TO N" line per edge."""
    return "\n".join(f"count {t} {s} {n}" for (t, s), n in counts.items()) + "\n"


def parse_counts(text):
    counts = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4 or fields[0] != "count":
            raise InputError(f"unrecognized line {line!r}", line=lineno)
        try:
            counts[(fields[1], fields[2])] = int(fields[3])
        except ValueError:
            raise InputError(f"bad count {fields[3]!r}", line=lineno) from None
    return counts


@dataclass
class FitResult:
    """Outcome of an estimation run.  ``objectives`` holds the conditional
    objective after every accepted iteration (empty for count training)."""

    params: object
    converged: bool = True
    iterations: int = 0
    objectives: list = field(default_factory=list)


def conditional_mle(corpus, support, init, sig, tol=1e-9, max_iters=10000):
    """Maximize the support-renormalized corpus likelihood over the
    transition table, starting from init.  Every corpus structure must occur
    in the support.  Rows without corpus evidence, or never occurring in the
    support, keep their initial values bit for bit; equate parameters pass
    through unchanged."""
    if not len(corpus):
        raise ModelError("empty corpus")
    if not support:
        raise ModelError("empty support set")
    support_keys = {serialize_fs(s) for s in support}
    for index, (fs, _) in enumerate(corpus, start=1):
        if serialize_fs(fs) not in support_keys:
            raise ModelError(
                f"corpus entry {index} does not occur in the support set")

    corpus_items = [(structure_edge_counts(fs, sig), mult)
                    for fs, mult in corpus]
    support_items = [structure_edge_counts(s, sig) for s in support]
    rows = {}
    for t in sig.non_maximal_types:
        rows[t] = [(t, s) for s in sig.decl(t).subtypes]
    fit = fit_conditional(rows, init.transition, corpus_items, support_items,
                          tol=tol, max_iters=max_iters)
    params = Params(fit.params, init.equate)
    return FitResult(params, fit.converged, fit.iterations, fit.objectives)


def fit_conditional(rows, init_table, corpus_items, support_items,
                    tol=1e-9, max_iters=10000):
    """Generic conditional maximum likelihood over row-normalized event
    tables.  Items are (Counter over keys, weight) for the corpus and plain
    Counters for the support.

    The update is a damped multiplicative one: each entry is scaled by
    (observed count / support-expected count) ** step and the row is
    renormalized, with the step halved until the objective does not
    decrease.  Rows without corpus evidence, or never occurring in the
    support, are returned exactly as initialized."""
    theta = dict(init_table)
    weight_total = float(sum(w for _, w in corpus_items))
    counts = Counter()
    for item, w in corpus_items:
        for key, n in item.items():
            counts[key] += w * n

    optimized = {
        row for row, keys in rows.items()
        if any(counts.get(k, 0) for k in keys)
        and any(any(k in item for k in keys) for item in support_items)
    }

    def item_log_prob(item):
        total = 0.0
        for key, n in item.items():
            p = theta[key]
            if p <= 0.0:
                return float("-inf")
            total += n * math.log(p)
        return total

    def log_partition():
        logs = [item_log_prob(item) for item in support_items]
        top = max(logs)
        if top == float("-inf"):
            return float("-inf"), logs
        log_z = top + math.log(math.fsum(math.exp(x - top) for x in logs))
        return log_z, logs

    def objective():
        log_z, _ = log_partition()
        data = math.fsum(w * item_log_prob(item) for item, w in corpus_items)
        return data - weight_total * log_z

    for item, _ in corpus_items:
        if item_log_prob(item) == float("-inf"):
            raise ModelError(
                "initial parameters assign zero probability to a corpus item")

    current = objective()
    objectives = [current]
    converged = False
    step = 0.5
    iterations = 0
    for iterations in range(1, max_iters + 1):
        log_z, logs = log_partition()
        expected = Counter()
        for item, lp in zip(support_items, logs):
            share = math.exp(lp - log_z)
            for key, n in item.items():
                expected[key] += weight_total * share * n

        direction = {}
        for row in optimized:
            for k in rows[row]:
                c = counts.get(k, 0.0)
                e = expected.get(k, 0.0)
                if c > 0.0 and e > 0.0:
                    direction[k] = math.log(c) - math.log(e)
                elif c == 0.0 and e == 0.0:
                    direction[k] = 0.0
                elif c == 0.0:
                    direction[k] = float("-inf")
                else:
                    raise ModelError(
                        "support-expected count vanished for an observed event")

        saved = dict(theta)
        improved = False
        step = min(step * 2.0, 1.0)
        while step > 1e-18:
            for row in optimized:
                weights = {}
                for k in rows[row]:
                    if saved[k] > 0.0:
                        weights[k] = saved[k] * math.exp(step * direction[k])
                    else:
                        weights[k] = 0.0
                norm = math.fsum(weights.values())
                for k in rows[row]:
                    theta[k] = weights[k] / norm
            value = objective()
            if value >= current:
                improved = True
                break
            step /= 2.0
        if not improved:
            theta = saved
            converged = True
            iterations -= 1
            break
        delta = max(abs(theta[k] - saved[k])
                    for row in optimized for k in rows[row]) if optimized else 0.0
        current = value
        objectives.append(current)
        if delta < tol:
            converged = True
            break
    else:
        converged = False

    for row, keys in rows.items():
        if row not in optimized:
            for k in keys:
                theta[k] = init_table[k]
    return FitResult(dict(theta), converged, iterations, objectives)
