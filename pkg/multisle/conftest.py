# conftest.py - shared fixtures for the multisle test suite

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from domain_algebra import LinkPattern  # noqa: E402
from schemas import Numerics  # noqa: E402
from settings import configure_logging  # noqa: E402
from special_fns import kappa_params  # noqa: E402

configure_logging("WARNING")


@pytest.fixture
def kappa3():
    return kappa_params(3.0)


@pytest.fixture
def kappa5():
    return kappa_params(5.0)


@pytest.fixture
def kappa6():
    return kappa_params(6.0)


@pytest.fixture
def coarse():
    """Cheap discretization for tests that only check plumbing"""
    return Numerics(dt=0.05, t_max=0.5, max_trace_points=200, zipper_points=200)


@pytest.fixture
def two_links():
    return LinkPattern.from_string("0,inf;1,2")


@pytest.fixture
def three_links():
    return LinkPattern.from_string("0,inf;1,2;-2,-1")
