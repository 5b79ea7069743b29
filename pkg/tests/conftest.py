import random
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ncdembed.seqio import Dataset, build_dataset, load_tsv  # noqa: E402

DATA = Path(__file__).parent / "data"


def dna(n: int, seed: int, alphabet: str = "ACGT") -> bytes:
    rng = random.Random(seed)
    return "".join(rng.choice(alphabet) for _ in range(n)).encode()


def two_alphabet_dataset(n: int = 200, length: int = 500, seed: int = 7) -> Dataset:
    """Two classes drawn from disjoint alphabets, alternating labels."""
    rng = np.random.default_rng(seed)
    alphabets = {"a": b"ACGT", "b": b"DEFH"}
    triples = []
    for i in range(n):
        label = "a" if i % 2 == 0 else "b"
        size = int(rng.integers(int(length * 0.9), int(length * 1.1) + 1))
        triples.append((f"s{i}", label, rng.choice(list(alphabets[label]), size=size).astype(np.uint8).tobytes()))
    return build_dataset(triples, source="synthetic")


def at_gc_dataset(n_per_class: int = 12, length: int = 400, seed: int = 3) -> Dataset:
    """AT-rich vs GC-rich random sequences (overlapping alphabets)."""
    rng = random.Random(seed)
    triples = []
    for i in range(n_per_class):
        for label, probs in (("at", "AAATTTGC"), ("gc", "GGGCCCAT")):
            seq = "".join(rng.choice(probs) for _ in range(length)).encode()
            triples.append((f"{label}{i}", label, seq))
    return build_dataset(triples, source="synthetic")


@pytest.fixture
def toy5() -> Dataset:
    return load_tsv(DATA / "toy5.tsv")


# ---------------------------------------------------------------- acceptance summary

_acceptance: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    prev = _acceptance.get(number, ("PASS", title))[0]
    if report.skipped:
        state = "SKIP"
    elif report.failed:
        state = "FAIL"
    elif report.when == "call":
        state = "PASS"
    else:
        return
    if prev == "FAIL":
        state = "FAIL"
    _acceptance[number] = (state, title)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        state, title = _acceptance[number]
        terminalreporter.write_line(f"criterion {number}: {state}  {title}")
