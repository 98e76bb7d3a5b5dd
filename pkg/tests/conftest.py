import pathlib

import pytest

import probhier as ph

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def fixture_text(name):
    return (FIXTURES / name).read_text(encoding="utf-8")


def fixture_path(name):
    return str(FIXTURES / name)


@pytest.fixture(scope="session")
def toy_sig():
    return ph.parse_signature(fixture_text("sign_num.ale"))


@pytest.fixture(scope="session")
def trained_params(toy_sig):
    return ph.load_params(fixture_text("params_fig8.pth"), toy_sig)


@pytest.fixture(scope="session")
def corpus5(toy_sig):
    return ph.parse_corpus(fixture_text("corpus5.fs"), toy_sig)


@pytest.fixture(scope="session")
def recursive_sig():
    return ph.parse_signature(fixture_text("recursive.ale"))


@pytest.fixture(scope="session")
def three_sig():
    return ph.parse_signature(fixture_text("three_item.ale"))


def three_params(q):
    return ph.Params({("bot", "triple"): 1.0, ("bot", "item"): 0.0},
                     {"item": q})


def sentence_fs(sig, left, right, tag=False):
    if tag:
        text = (f"(sentence (left (np (num #1=({left})))) "
                f"(right (vp (num #1))))")
    else:
        text = (f"(sentence (left (np (num {left}))) "
                f"(right (vp (num {right}))))")
    return ph.parse_fs(text, sig)
