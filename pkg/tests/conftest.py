import numpy as np
import pytest

from qcfuse.model import ModelConfig, init_weights


@pytest.fixture(scope="session")
def small_config():
    return ModelConfig(n_layers=4, n_heads=2, d_model=32, d_head=16, d_ff=64, seed=1234)


@pytest.fixture(scope="session")
def small_weights(small_config):
    return init_weights(small_config)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if getattr(rep, "when", "call") != "call":
                continue
            if "test_acceptance" in rep.nodeid:
                tag = "PASS" if status == "passed" else "FAIL"
                name = rep.nodeid.split("::")[-1]
                lines.append(f"{tag}  {name}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
