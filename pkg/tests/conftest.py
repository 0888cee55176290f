import itertools
import sys

import numpy as np
import pytest

from sfqecc.codec import RM13
from sfqecc.netlist import build_rm13_reference


@pytest.fixture(scope="session")
def ref():
    return build_rm13_reference()


@pytest.fixture(scope="session")
def messages16():
    return np.array(list(itertools.product((0, 1), repeat=4)), dtype=np.uint8)


@pytest.fixture(scope="session")
def codewords16(messages16):
    return (messages16.astype(int) @ RM13.G % 2).astype(np.uint8)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
