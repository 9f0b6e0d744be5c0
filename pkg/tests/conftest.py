import json
from pathlib import Path

import pytest

from quadbound.model import ModelParams
from quadbound.shoot import SolutionVector

DATA = Path(__file__).parent / "data"

# acceptance checks grouped by criterion, summarized at the end of the run
ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((ok, detail))
    print(f"{'PASS' if ok else 'FAIL'} [{criterion}] {detail}")


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def gaits():
    """Converged gaits at infinite inertia keyed by branch and index, plus point F at J=1.047."""
    raw = json.loads((DATA / "gaits.json").read_text())
    out = {k: SolutionVector(v) for k, v in raw["J_inf"].items()}
    out["F"] = SolutionVector(raw["J_1.047"]["F"])
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[criterion]
        bad = [d for ok, d in checks if not ok]
        status = "PASS" if not bad else "FAIL"
        terminalreporter.write_line(f"{status} {criterion} ({len(checks) - len(bad)}/{len(checks)} checks)")
        for ok, detail in checks:
            terminalreporter.write_line(f"    {'ok ' if ok else 'BAD'} {detail}")
