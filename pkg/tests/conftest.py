import pytest

from stairprune.dispatch import GemmCostCoefficients
from stairprune.model import LatencyCurve, make_layer_spec

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        _CRITERIA.append((label, ok, detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {label} {detail}")
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label} {detail}")


@pytest.fixture
def layer16():
    """ResNet-50 layer 16 geometry: 3x3, 128 filters over a 28x28 map."""
    return make_layer_spec("ResNet.L16", 128, 128, 3, input_h=28, stride=1, padding=1)


@pytest.fixture
def layer16_coeffs():
    # hand arithmetic on the 92- and 93-channel tables:
    # slope 1,379,034 - 1,365,198; intercept 1,365,198 - 92 * slope; unit 848,055,936 / 96
    return GemmCostCoefficients(
        im2col_arith_slope=13_836,
        im2col_arith_intercept=92_286,
        im2col_mem_slope=2_306,
        im2col_mem_intercept=0,
        reshape_arith_const=44_183_104,
        reshape_mem_const=3_615_808,
        gemm_arith_unit=8_833_916,
        gemm_mem_unit=453_348,
    )


@pytest.fixture
def two_step():
    return LatencyCurve("toy", {c: (10.0 if c <= 5 else 20.0) for c in range(1, 11)})


@pytest.fixture
def interleaved():
    """Group-of-4 interleave: channels = 1..4 (mod 8) at 14 ms, 5..8 (mod 8) at 23 ms."""
    return LatencyCurve("toy", {c: (14.0 if (c - 1) % 8 < 4 else 23.0) for c in range(1, 65)})
