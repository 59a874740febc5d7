import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from varjet.symexpr import BundleSignature, parse_expression

settings.register_profile(
    "varjet", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("varjet")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def oracles():
    return json.loads((DATA / "oracles.json").read_text())


@pytest.fixture
def sig_x():
    return BundleSignature(("x",), ("u",))


@pytest.fixture
def sig_tx():
    return BundleSignature(("t", "x"), ("u",))


@pytest.fixture
def sig_kg():
    return BundleSignature(("t", "x"), ("u",), ("m",))


def P(text, sig):
    """Parse with ``**`` accepted as a synonym for ``^`` (sympy output)."""
    return parse_expression(text.replace("**", "^"), sig)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
