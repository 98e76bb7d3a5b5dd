"""Probabilistic type hierarchies over typed feature structures.

A type signature declares an inheritance hierarchy plus the features each
type introduces.  Attaching a probability distribution to every type's choice
of direct subtype turns the hierarchy into a generative model over typed
feature structures; an extension adds per-type equate probabilities that
generate shared (re-entrant) nodes.  The package covers parsing and
validation of the file formats, structure scoring, bounded enumeration,
seeded sampling, parameter estimation from corpora, and a context-free
baseline for comparison.
"""

from .errors import InputError, ModelError, ProbhierError
from .signature import (
    IntroductionRelation,
    Signature,
    TypeDecl,
    introduction_relations,
    iterated_introductions,
    parse_signature,
    serialize_signature,
)
from .fstruct import (
    Corpus,
    FeatureStructure,
    Node,
    parse_corpus,
    parse_fs,
    serialize_corpus,
    serialize_fs,
    well_typed,
)
from .model import (
    Params,
    enumerate_structures,
    load_params,
    log_structure_probability,
    sample_structure,
    save_params,
    structure_probability,
    uniform_params,
)
from .reentrancy import (
    decision_split,
    enumerate_reentrant,
    estimate_equate,
    leaked_mass,
    log_score_reentrant,
    sample_reentrant,
    score_reentrant,
)
from .train import (
    FitResult,
    conditional_mle,
    count_transitions,
    estimate,
    format_counts,
    parse_counts,
)
from .pcfg import (
    Pcfg,
    Tree,
    log_tree_probability,
    parse_grammar,
    parse_tree,
    parse_treebank,
    serialize_grammar,
    serialize_tree,
    train_pcfg,
    tree_probability,
    uniform_rule_probs,
)

__version__ = "0.1.0"
