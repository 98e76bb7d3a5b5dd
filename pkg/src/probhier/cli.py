"""Command-line surface.  Exit status: 0 success, 1 usage error, 2 input
format error, 3 model or precondition violation.  All output is
byte-deterministic given identical inputs, flags and seeds; probabilities
print with 12 significant digits."""

import argparse
import math
import sys

from . import fstruct, model, pcfg, reentrancy, train
from .errors import InputError, ModelError
from .signature import introduction_relations, parse_signature


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _read(path):
    try:
        with open(path, encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _load(path, parse, *args):
    text = _read(path)
    try:
        return parse(text, *args)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_sig(path):
    return _load(path, parse_signature)


def _fmt(p):
    return f"{p:.12g}"


def _fmt_log(logp):
    return f"{logp:.12g}" if logp > float("-inf") else "-inf"


# -- subcommands ---------------------------------------------------------------


def _cmd_sig_check(args):
    _load_sig(args.sigfile)
    print("ok")
    return 0


def _cmd_sig_relations(args):
    sig = _load_sig(args.sigfile)
    for rel in introduction_relations(sig):
        inner = ",".join(rel.introduced)
        print(f"{rel.from_type} => {rel.to_type} -> [{inner}]")
    return 0


def _cmd_train(args):
    sig = _load_sig(args.sig)
    corpus = _load(args.corpus, fstruct.parse_corpus, sig)
    if args.init:
        init = _load(args.init, model.load_params, sig)
    else:
        init = model.uniform_params(sig)
    counts = train.count_transitions(corpus, sig)
    if args.dump_counts:
        with open(args.dump_counts, "w", encoding="utf-8") as handle:
            handle.write(train.format_counts(counts))
    if args.estimator == "count":
        params = train.estimate(counts, init)
    else:
        if not args.support:
            raise _UsageError("--estimator conditional needs --support")
        support_corpus = _load(args.support, fstruct.parse_corpus, sig)
        support = [fs for fs, _ in support_corpus]
        result = train.conditional_mle(corpus, support, init, sig,
                                       tol=args.tol, max_iters=args.max_iters)
        if not result.converged:
            print(f"warning: estimator stopped after {result.iterations} "
                  "iterations without converging", file=sys.stderr)
        params = result.params
    equate = reentrancy.estimate_equate(corpus, sig, init)
    params = model.Params(params.transition, equate)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(model.save_params(params, sig))
    return 0


def _score_fn(args, sig, params):
    if args.reentrant:
        return lambda fs: reentrancy.log_score_reentrant(params, sig, fs)
    return lambda fs: model.log_structure_probability(params, sig, fs)


def _cmd_score(args):
    sig = _load_sig(args.sig)
    params = _load(args.params, model.load_params, sig)
    corpus = _load(args.fsfile, fstruct.parse_corpus, sig)
    score = _score_fn(args, sig, params)
    for fs, _ in corpus:
        logp = score(fs)
        print(_fmt_log(logp) if args.log else _fmt(math.exp(logp)))
    return 0


def _cmd_rank(args):
    sig = _load_sig(args.sig)
    params = _load(args.params, model.load_params, sig)
    corpus = _load(args.fsfile, fstruct.parse_corpus, sig)
    scored = []
    for fs, _ in corpus:
        p = model.structure_probability(params, sig, fs)
        scored.append((fstruct.serialize_fs(fs), p))
    scored.sort(key=lambda item: (-item[1], item[0]))
    for text, p in scored:
        print(f"{text}\t{_fmt(p)}")
    return 0


def _cmd_enumerate(args):
    sig = _load_sig(args.sig)
    params = _load(args.params, model.load_params, sig)

    def prob_str(p):
        return _fmt_log(math.log(p) if p > 0.0 else float("-inf")) \
            if args.log else _fmt(p)

    if args.reentrant:
        items, leaked, residual = reentrancy.enumerate_reentrant(
            params, sig, args.max_nodes)
        for fs, p in items:
            print(f"{fstruct.serialize_fs(fs)}\t{prob_str(p)}")
        print(f"leaked_mass\t{_fmt(leaked)}")
        print(f"residual_mass\t{_fmt(residual)}")
    else:
        items, residual = model.enumerate_structures(params, sig, args.max_nodes)
        for fs, p in items:
            print(f"{fstruct.serialize_fs(fs)}\t{prob_str(p)}")
        print(f"residual_mass\t{_fmt(residual)}")
    return 0


def _cmd_sample(args):
    sig = _load_sig(args.sig)
    params = _load(args.params, model.load_params, sig)
    for index in range(args.count):
        seed = args.seed + index
        if args.reentrant:
            fs = reentrancy.sample_reentrant(params, sig, seed,
                                             max_steps=args.max_steps,
                                             max_retries=args.max_retries)
        else:
            fs = model.sample_structure(params, sig, seed,
                                        max_steps=args.max_steps)
        if fs is None:
            print(f"error: sample {index} (seed {seed}): budget exceeded",
                  file=sys.stderr)
            return 3
        print(fstruct.serialize_fs(fs))
    return 0


def _cmd_leak(args):
    sig = _load_sig(args.sig)
    params = _load(args.params, model.load_params, sig)
    for bound in range(1, args.max_nodes + 1):
        print(f"{bound}\t{_fmt(reentrancy.leaked_mass(params, sig, bound))}")
    return 0


def _cmd_pcfg_train(args):
    grammar = _load(args.grammar, pcfg.parse_grammar)
    treebank = _load(args.treebank, pcfg.parse_treebank)
    support = None
    if args.support:
        support = _load(args.support, pcfg.parse_treebank)
    result = pcfg.train_pcfg(grammar, treebank, estimator=args.estimator,
                             support=support, tol=args.tol,
                             max_iters=args.max_iters)
    if not result.converged:
        print(f"warning: estimator stopped after {result.iterations} "
              "iterations without converging", file=sys.stderr)
    trained = grammar.with_probs(result.params)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(pcfg.serialize_grammar(trained))
    return 0


def _cmd_pcfg_score(args):
    grammar = _load(args.grammar, pcfg.parse_grammar)
    treebank = _load(args.treebank, pcfg.parse_treebank)
    for tree in treebank:
        logp = pcfg.log_tree_probability(grammar, tree)
        print(_fmt_log(logp) if args.log else _fmt(math.exp(logp)))
    return 0


# -- wiring --------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="probhier",
                     description="Probabilistic type hierarchies over typed "
                                 "feature structures, with a PCFG baseline.")
    sub = parser.add_subparsers(dest="command", required=True)

    sig = sub.add_parser("sig", help="signature utilities")
    sig_sub = sig.add_subparsers(dest="subcommand", required=True)
    check = sig_sub.add_parser("check", help="validate a signature file")
    check.add_argument("sigfile")
    check.set_defaults(func=_cmd_sig_check)
    rel = sig_sub.add_parser("relations",
                             help="print the introduction relations")
    rel.add_argument("sigfile")
    rel.set_defaults(func=_cmd_sig_relations)

    tr = sub.add_parser("train", help="estimate parameters from a corpus")
    tr.add_argument("--sig", required=True)
    tr.add_argument("--corpus", required=True)
    tr.add_argument("--estimator", choices=("count", "conditional"),
                    default="count")
    tr.add_argument("--support", help="support structures for the "
                                      "conditional estimator")
    tr.add_argument("--init", help="initial parameter file (default uniform)")
    tr.add_argument("--out", required=True)
    tr.add_argument("--dump-counts", help="also write the transition counts")
    tr.add_argument("--tol", type=float, default=1e-9)
    tr.add_argument("--max-iters", type=int, default=10000)
    tr.set_defaults(func=_cmd_train)

    sc = sub.add_parser("score", help="print one probability per structure")
    sc.add_argument("--sig", required=True)
    sc.add_argument("--params", required=True)
    sc.add_argument("--reentrant", action="store_true")
    sc.add_argument("--log", action="store_true",
                    help="print natural logs instead of probabilities")
    sc.add_argument("fsfile")
    sc.set_defaults(func=_cmd_score)

    rk = sub.add_parser("rank", help="sort structures by probability")
    rk.add_argument("--sig", required=True)
    rk.add_argument("--params", required=True)
    rk.add_argument("fsfile")
    rk.set_defaults(func=_cmd_rank)

    en = sub.add_parser("enumerate",
                        help="list structures within a node bound")
    en.add_argument("--sig", required=True)
    en.add_argument("--params", required=True)
    en.add_argument("--max-nodes", type=int, required=True)
    en.add_argument("--reentrant", action="store_true")
    en.add_argument("--log", action="store_true")
    en.set_defaults(func=_cmd_enumerate)

    sa = sub.add_parser("sample", help="draw structures from the model")
    sa.add_argument("--sig", required=True)
    sa.add_argument("--params", required=True)
    sa.add_argument("--seed", type=int, required=True)
    sa.add_argument("--count", type=int, required=True)
    sa.add_argument("--max-steps", type=int, default=10000)
    sa.add_argument("--reentrant", action="store_true")
    sa.add_argument("--max-retries", type=int, default=1000)
    sa.set_defaults(func=_cmd_sample)

    lk = sub.add_parser("leak", help="leaked mass per node bound")
    lk.add_argument("--sig", required=True)
    lk.add_argument("--params", required=True)
    lk.add_argument("--max-nodes", type=int, required=True)
    lk.set_defaults(func=_cmd_leak)

    pc = sub.add_parser("pcfg", help="context-free baseline")
    pc_sub = pc.add_subparsers(dest="subcommand", required=True)
    pt = pc_sub.add_parser("train", help="estimate rule probabilities")
    pt.add_argument("--grammar", required=True)
    pt.add_argument("--treebank", required=True)
    pt.add_argument("--estimator", choices=("count", "conditional"),
                    default="count")
    pt.add_argument("--support")
    pt.add_argument("--out", required=True)
    pt.add_argument("--tol", type=float, default=1e-9)
    pt.add_argument("--max-iters", type=int, default=10000)
    pt.set_defaults(func=_cmd_pcfg_train)
    ps = pc_sub.add_parser("score", help="print one probability per tree")
    ps.add_argument("--grammar", required=True)
    ps.add_argument("--treebank", required=True)
    ps.add_argument("--log", action="store_true")
    ps.set_defaults(func=_cmd_pcfg_score)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
