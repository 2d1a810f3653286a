import pytest

from wheelsim.corpus import generate_corpus


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """Materialized labeled detector corpus (deterministic, seed 7)."""
    out = tmp_path_factory.mktemp("detector_corpus")
    generate_corpus(out, seed=7)
    return out


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                rows.append((nodeid.split("::")[-1], outcome))
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, outcome in sorted(set(rows)):
            tag = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"[{tag}] {name}")
