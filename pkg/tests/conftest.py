"""Shared fixtures: the bundled network corpus."""

from pathlib import Path

import pytest

from rdnet.netparse import load_network, parse_network

NETWORKS = Path(__file__).resolve().parent.parent / "networks"

ROTHE = """
species A1 A2 A3;
A1 + A2 <-> A3 : kf=1, kb=1;
"""


@pytest.fixture
def networks_dir() -> Path:
    return NETWORKS


@pytest.fixture
def rothe():
    return parse_network(ROTHE)


@pytest.fixture
def rothe_own():
    return load_network(NETWORKS / "rothe_own.rxn")


@pytest.fixture
def mmh():
    return load_network(NETWORKS / "mmh.rxn")


@pytest.fixture
def polymer():
    return load_network(NETWORKS / "polymer.rxn")


@pytest.fixture
def heat():
    """One species, unit diffusivity, no reactions."""
    return parse_network("species u;")
