import math

import pytest

import probhier as ph
from probhier.cli import main

from conftest import fixture_path, fixture_text

SIG = fixture_path("sign_num.ale")
PARAMS = fixture_path("params_fig8.pth")
CORPUS = fixture_path("corpus5.fs")


def run(capsys, *argv):
    status = main(list(argv))
    captured = capsys.readouterr()
    return status, captured.out, captured.err


def test_sig_check_ok(capsys):
    status, out, err = run(capsys, "sig", "check", SIG)
    assert status == 0
    assert out.strip() == "ok"


def test_sig_check_reports_unknown_value_type(tmp_path, capsys):
    bad = tmp_path / "bad.ale"
    bad.write_text("bot sub [x].\nx sub [] intro [f:ghost].\n")
    status, _, err = run(capsys, "sig", "check", str(bad))
    assert status == 2
    assert "ghost" in err


def test_sig_relations(capsys):
    status, out, _ = run(capsys, "sig", "relations", SIG)
    assert status == 0
    assert out.splitlines() == [
        "bot => sign -> []",
        "bot => num -> []",
        "sign => sentence -> [np,vp]",
        "sign => phrase -> [num]",
        "phrase => np -> []",
        "phrase => vp -> []",
        "num => sing -> []",
        "num => pl -> []",
    ]


def test_train_count_then_score(tmp_path, capsys):
    out_path = tmp_path / "trained.pth"
    status, _, _ = run(capsys, "train", "--sig", SIG, "--corpus", CORPUS,
                       "--estimator", "count", "--out", str(out_path))
    assert status == 0
    text = out_path.read_text()
    assert "trans num sing 0.4" in text
    assert "trans num pl 0.6" in text

    single = tmp_path / "single.fs"
    single.write_text(
        "(sentence (left (np (num sing))) (right (vp (num sing))))\n")
    status, out, _ = run(capsys, "score", "--sig", SIG,
                         "--params", str(out_path), str(single))
    assert status == 0
    assert out.strip() == "0.16"


def test_train_dump_counts(tmp_path, capsys):
    out_path = tmp_path / "trained.pth"
    counts_path = tmp_path / "counts.txt"
    status, _, _ = run(capsys, "train", "--sig", SIG, "--corpus", CORPUS,
                       "--out", str(out_path),
                       "--dump-counts", str(counts_path))
    assert status == 0
    lines = counts_path.read_text().splitlines()
    assert "count num sing 4" in lines
    assert "count num pl 6" in lines


def test_train_conditional(tmp_path, capsys):
    out_path = tmp_path / "cond.pth"
    status, _, _ = run(capsys, "train", "--sig", SIG, "--corpus", CORPUS,
                       "--estimator", "conditional",
                       "--support", fixture_path("support_agree.fs"),
                       "--out", str(out_path))
    assert status == 0
    sig = ph.parse_signature(fixture_text("sign_num.ale"))
    params = ph.load_params(out_path.read_text(), sig)
    closed = math.sqrt(2) / (math.sqrt(2) + math.sqrt(3))
    assert params.transition[("num", "sing")] == pytest.approx(closed, abs=5e-4)


def test_train_conditional_warns_without_convergence(tmp_path, capsys):
    out_path = tmp_path / "partial.pth"
    status, _, err = run(capsys, "train", "--sig", SIG, "--corpus", CORPUS,
                         "--estimator", "conditional",
                         "--support", fixture_path("support_agree.fs"),
                         "--max-iters", "1", "--out", str(out_path))
    assert status == 0
    assert "without converging" in err
    assert out_path.exists()


def test_train_conditional_requires_support(capsys, tmp_path):
    status, _, err = run(capsys, "train", "--sig", SIG, "--corpus", CORPUS,
                         "--estimator", "conditional",
                         "--out", str(tmp_path / "x.pth"))
    assert status == 1
    assert "support" in err


def test_score_log_flag(capsys):
    status, out, _ = run(capsys, "score", "--sig", SIG, "--params", PARAMS,
                         "--log", fixture_path("corpus5.fs"))
    assert status == 0
    values = out.splitlines()
    assert float(values[0]) == pytest.approx(math.log(0.2025), rel=1e-9)
    assert float(values[1]) == pytest.approx(math.log(0.3025), rel=1e-9)


def test_score_zero_probability_log(capsys, tmp_path):
    bare = tmp_path / "bare.fs"
    bare.write_text("(sing)\n")
    status, out, _ = run(capsys, "score", "--sig", SIG, "--params", PARAMS,
                         "--log", str(bare))
    assert status == 0
    assert out.strip() == "-inf"


def test_score_rejects_partial_structure(capsys, tmp_path):
    f = tmp_path / "partial.fs"
    f.write_text("(num)\n")
    status, _, err = run(capsys, "score", "--sig", SIG, "--params", PARAMS,
                         str(f))
    assert status == 3
    assert "maximally specified" in err


def test_score_reentrant(capsys, tmp_path):
    f = tmp_path / "tagged.fs"
    f.write_text("(sentence (left (np (num #1=(sing)))) (right (vp (num #1))))\n")
    params = tmp_path / "q.pth"
    params.write_text(fixture_text("params_fig8.pth") + "eq sing 0.3\n")
    status, out, _ = run(capsys, "score", "--sig", SIG,
                         "--params", str(params), "--reentrant", str(f))
    assert status == 0
    assert out.strip() == "0.135"


def test_rank(capsys):
    status, out, _ = run(capsys, "rank", "--sig", SIG, "--params", PARAMS,
                         fixture_path("sentences4.fs"))
    assert status == 0
    lines = [line.split("\t") for line in out.splitlines()]
    probs = [float(p) for _, p in lines]
    assert probs == sorted(probs, reverse=True)
    assert probs[0] == pytest.approx(0.3025, rel=1e-9)
    assert probs[1] == probs[2]
    assert probs[3] == pytest.approx(0.2025, rel=1e-9)
    assert lines[1][0] < lines[2][0]  # ties broken by serialization


def test_enumerate(capsys):
    status, out, _ = run(capsys, "enumerate", "--sig", SIG, "--params", PARAMS,
                         "--max-nodes", "16")
    assert status == 0
    lines = out.splitlines()
    assert lines[-1].startswith("residual_mass\t")
    assert float(lines[-1].split("\t")[1]) == pytest.approx(0.0, abs=1e-9)
    body = dict(line.split("\t") for line in lines[:-1])
    assert body[
        "(sentence (left (np (num pl))) (right (vp (num pl))))"] == "0.3025"
    assert body[
        "(sentence (left (np (num sing))) (right (vp (num sing))))"] == "0.2025"


def test_enumerate_score_agreement(capsys, tmp_path):
    status, out, _ = run(capsys, "enumerate", "--sig", SIG, "--params", PARAMS,
                         "--max-nodes", "16")
    assert status == 0
    lines = [line.split("\t") for line in out.splitlines()[:-1]]
    listing = tmp_path / "all.fs"
    listing.write_text("".join(text + "\n" for text, _ in lines))
    status, scored, _ = run(capsys, "score", "--sig", SIG, "--params", PARAMS,
                            str(listing))
    assert status == 0
    for (_, enumerated), direct in zip(lines, scored.splitlines()):
        assert abs(float(enumerated) - float(direct)) < 1e-12


def test_enumerate_reentrant(capsys):
    status, out, _ = run(capsys, "enumerate",
                         "--sig", fixture_path("three_item.ale"),
                         "--params", fixture_path("three_item.pth"),
                         "--max-nodes", "8", "--reentrant")
    assert status == 0
    lines = out.splitlines()
    assert lines[-2] == "leaked_mass\t0.375"
    assert lines[-1] == "residual_mass\t0"


def test_enumerate_log_flag(capsys):
    status, out, _ = run(capsys, "enumerate", "--sig", SIG, "--params", PARAMS,
                         "--max-nodes", "16", "--log")
    assert status == 0
    lines = out.splitlines()
    body = dict(line.split("\t") for line in lines[:-1])
    assert body["(sing)"] == "-inf"
    logp = float(body["(sentence (left (np (num pl))) (right (vp (num pl))))"])
    assert logp == pytest.approx(math.log(0.3025), rel=1e-9)
    # the mass line stays linear
    assert lines[-1] == "residual_mass\t0"


def test_rank_rejects_tagged_structures(capsys, tmp_path):
    f = tmp_path / "tagged.fs"
    f.write_text("(sentence (left (np (num #1=(sing)))) (right (vp (num #1))))\n")
    status, _, err = run(capsys, "rank", "--sig", SIG, "--params", PARAMS,
                         str(f))
    assert status == 3
    assert "re-entrancy" in err


def test_train_with_init_file(capsys, tmp_path):
    out_path = tmp_path / "trained.pth"
    status, _, _ = run(capsys, "train", "--sig", SIG, "--corpus", CORPUS,
                       "--estimator", "count", "--init", PARAMS,
                       "--out", str(out_path))
    assert status == 0
    text = out_path.read_text().splitlines()
    assert "trans num sing 0.4" in text
    assert "trans phrase np 0.5" in text  # unobserved row copied from init


def test_pcfg_score_needs_probabilities(capsys):
    status, _, err = run(capsys, "pcfg", "score",
                         "--grammar", fixture_path("grammar.pcfg"),
                         "--treebank", fixture_path("corpus5.trees"))
    assert status == 3
    assert "probabilities" in err


def test_sample_deterministic(capsys):
    status, first, _ = run(capsys, "sample", "--sig", SIG, "--params", PARAMS,
                           "--seed", "11", "--count", "20")
    assert status == 0
    status, second, _ = run(capsys, "sample", "--sig", SIG, "--params", PARAMS,
                            "--seed", "11", "--count", "20")
    assert status == 0
    assert first == second
    assert len(first.splitlines()) == 20


def test_sample_budget_exceeded(capsys, tmp_path):
    params = tmp_path / "forced.pth"
    params.write_text("trans bot a 1.0\ntrans bot b 0.0\n")
    status, _, err = run(capsys, "sample",
                         "--sig", fixture_path("recursive.ale"),
                         "--params", str(params),
                         "--seed", "0", "--count", "1", "--max-steps", "40")
    assert status == 3
    assert "budget exceeded" in err


def test_leak_table(capsys):
    status, out, _ = run(capsys, "leak",
                         "--sig", fixture_path("three_item.ale"),
                         "--params", fixture_path("three_item.pth"),
                         "--max-nodes", "5")
    assert status == 0
    rows = [line.split("\t") for line in out.splitlines()]
    assert [r[0] for r in rows] == ["1", "2", "3", "4", "5"]
    assert float(rows[3][1]) == pytest.approx(0.375, abs=1e-12)
    assert float(rows[0][1]) == 0.0


def test_pcfg_train_and_score(capsys, tmp_path):
    out_path = tmp_path / "trained.pcfg"
    status, _, _ = run(capsys, "pcfg", "train",
                       "--grammar", fixture_path("grammar.pcfg"),
                       "--treebank", fixture_path("corpus5.trees"),
                       "--out", str(out_path))
    assert status == 0
    assert "np -> np-sing : 0.4" in out_path.read_text().splitlines()

    status, out, _ = run(capsys, "pcfg", "score",
                         "--grammar", fixture_path("grammar_structural.pcfg"),
                         "--treebank", fixture_path("sentences4.trees"))
    assert status == 0
    assert out.splitlines() == ["0.2025", "0.2475", "0.2475", "0.3025"]


def test_pcfg_train_conditional(capsys, tmp_path):
    out_path = tmp_path / "cond.pcfg"
    status, _, _ = run(capsys, "pcfg", "train",
                       "--grammar", fixture_path("grammar_structural.pcfg"),
                       "--treebank", fixture_path("corpus5_pre.trees"),
                       "--estimator", "conditional",
                       "--support", fixture_path("support_agree.trees"),
                       "--out", str(out_path))
    assert status == 0
    g = ph.parse_grammar(out_path.read_text())
    closed = math.sqrt(2) / (math.sqrt(2) + math.sqrt(3))
    assert g.probs[("np", ("np-sing",))] == pytest.approx(closed, abs=5e-4)


def test_usage_error_exit_code(capsys):
    status, _, err = run(capsys, "score", "--sig", SIG)
    assert status == 1
    assert "usage error" in err


def test_missing_file_exit_code(capsys):
    status, _, err = run(capsys, "sig", "check", "/nonexistent/file.ale")
    assert status == 2


def test_byte_determinism(capsys):
    first = run(capsys, "enumerate", "--sig", SIG, "--params", PARAMS,
                "--max-nodes", "16")
    second = run(capsys, "enumerate", "--sig", SIG, "--params", PARAMS,
                 "--max-nodes", "16")
    assert first == second
