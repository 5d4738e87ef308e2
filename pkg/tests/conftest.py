"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import os

import pytest
from hypothesis import settings

from sparse_mimo.edof import LobeParams
from sparse_mimo.geometry import ArrayPair, LinkGeometry

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Reference single-user link: 128-element BS, 16-element UE, 40 m broadside.
REF_N_BS, REF_N_UE, REF_RANGE, REF_WAVELENGTH = 128, 16, 40.0, 0.01

ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


@pytest.fixture
def ref_geo() -> LinkGeometry:
    return LinkGeometry(REF_RANGE)


@pytest.fixture
def ref_pair() -> ArrayPair:
    return ArrayPair.build(REF_N_BS, REF_N_UE, 1.0, 1.0, REF_WAVELENGTH)


@pytest.fixture
def ref_params() -> LobeParams:
    return LobeParams(REF_RANGE, REF_WAVELENGTH, 1.0, 1.0, REF_N_BS, REF_N_UE)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
