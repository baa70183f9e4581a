import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from sublim.clt import StepFamily
from sublim.measures import AmbiguitySet, DiscreteMeasure, rademacher

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(label, passed, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {label} {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def two_rademacher():
    return StepFamily([rademacher(1.0), rademacher(2.0)])


@pytest.fixture
def skewed_pair():
    return AmbiguitySet([DiscreteMeasure([-1, 1], [0.3, 0.7]), DiscreteMeasure([-1, 1], [0.7, 0.3])])


def lattice_measure(a, b, p0):
    """Centred measure on {-a, 0, b}."""
    rest = 1.0 - p0
    return DiscreteMeasure([-a, 0.0, b], [rest * b / (a + b), p0, rest * a / (a + b)])


def random_step_family(rng, max_members=3, max_atom=3):
    members = []
    for _ in range(rng.integers(1, max_members + 1)):
        a, b = rng.integers(1, max_atom + 1, size=2)
        members.append(lattice_measure(float(a), float(b), float(rng.uniform(0, 0.6))))
    return StepFamily(members)


@st.composite
def step_families(draw, max_members=3, max_atom=3):
    members = []
    for _ in range(draw(st.integers(1, max_members))):
        a = draw(st.integers(1, max_atom))
        b = draw(st.integers(1, max_atom))
        p0 = draw(st.floats(0, 0.6))
        members.append(lattice_measure(float(a), float(b), p0))
    return StepFamily(members)


@st.composite
def ambiguity_sets(draw, dim=1, max_members=4, max_atoms=5):
    coords = st.integers(-6, 6).map(lambda k: k / 2)
    measures = []
    for _ in range(draw(st.integers(1, max_members))):
        pts = draw(st.lists(st.tuples(*[coords] * dim), min_size=1, max_size=max_atoms, unique=True))
        raw = draw(st.lists(st.floats(0.01, 1.0), min_size=len(pts), max_size=len(pts)))
        total = math.fsum(raw)
        measures.append(DiscreteMeasure([list(p) for p in pts], [w / total for w in raw]))
    return AmbiguitySet(measures)


def random_ambiguity_set(rng, dim=1, max_members=4, max_atoms=5):
    measures = []
    for _ in range(rng.integers(1, max_members + 1)):
        k = int(rng.integers(1, max_atoms + 1))
        grid = np.array(np.meshgrid(*[np.arange(-6, 7) / 2] * dim)).reshape(dim, -1).T
        pts = grid[rng.choice(len(grid), size=k, replace=False)]
        w = rng.uniform(0.01, 1.0, size=k)
        measures.append(DiscreteMeasure(pts, w / w.sum()))
    return AmbiguitySet(measures)
