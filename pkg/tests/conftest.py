import pytest

from contract_lens.cca import CcaSpec
from contract_lens.netsim import Dumbbell, LinkSpec, ScenarioSpec
from contract_lens.netsim.engine import compiled_available

MBPS = 1e6 / 8
MS = 1_000_000
CAP = 100 * MBPS
RTPROP = 10 * MS
SER = 120_000  # 1500 B at 100 Mbps, in ns

ENGINES = ["python"] + (["c"] if compiled_available() else [])


def dumbbell(cca: CcaSpec, flows: int = 2, duration_ms: int = 4000, **kw) -> ScenarioSpec:
    link = kw.pop("link", LinkSpec(CAP, RTPROP // 2))
    return ScenarioSpec(Dumbbell(flows), link, cca, duration=duration_ms * MS, **kw)


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    _ACCEPTANCE[number] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
