import functools

import pytest

from cntsram.analysis import (Mode, Operation, ProtocolConfig, butterfly, run_testbench,
                              write_margin)
from cntsram.cells import CellKind
from cntsram.snm import snm_max_square

ALL_CELLS = list(CellKind)


@functools.lru_cache(maxsize=None)
def cached_butterfly(kind, mode, cfg=ProtocolConfig()):
    return butterfly(kind, mode, cfg)


@functools.lru_cache(maxsize=None)
def cached_snm(kind, mode, cfg=ProtocolConfig()):
    if mode is Mode.WRITE:
        return write_margin(kind, cfg)
    return snm_max_square(cached_butterfly(kind, mode, cfg), kind.value)


@functools.lru_cache(maxsize=None)
def cached_testbench(kind, op, cfg=ProtocolConfig()):
    return run_testbench(kind, op, cfg)


@pytest.fixture
def cfg():
    return ProtocolConfig()


@pytest.fixture(params=ALL_CELLS, ids=lambda k: k.value)
def kind(request):
    return request.param


@pytest.fixture(params=list(Operation), ids=lambda o: o.value)
def op(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
