# tests/test_properties.py

import random

import pytest

from qp_recast.qpmodel import is_standard, validate
from qp_recast.randomsuite import (
    check_class_invariant,
    check_integral_drift,
    check_standardization,
    random_deficient_system,
    random_standard_system,
    random_suite,
    run_all,
)


@pytest.mark.unit
def test_generators_are_reproducible():
    first = random_suite(random.Random(7), 8)
    second = random_suite(random.Random(7), 8)
    assert first == second
    for sys in first:
        assert validate(sys)


@pytest.mark.unit
@pytest.mark.parametrize("deficient", ["A", "B", "M"])
def test_deficient_generator_lowers_the_requested_rank(deficient):
    rng = random.Random(11)
    for _ in range(5):
        sys = random_deficient_system(rng, deficient)
        assert sys.rank_summary()[deficient] < sys.n
        assert not is_standard(sys)


@pytest.mark.unit
def test_standard_generator():
    rng = random.Random(5)
    assert all(is_standard(random_standard_system(rng)) for _ in range(10))


@pytest.mark.unit
def test_class_invariant_property():
    """
    GIVEN random standard systems and random invertible C
    WHEN quasimonomial transformations and full Lotka-Volterra embeddings are applied
    THEN B.M never changes
    """
    result = check_class_invariant(seed=1, count=100)
    assert result.passed, result.failures


@pytest.mark.unit
def test_standardization_property():
    """
    GIVEN random systems with rank deficiencies in A, B and M
    WHEN they are standardized
    THEN every output is standard and every trace replays
    """
    result = check_standardization(seed=2, count=50)
    assert result.passed, result.failures


@pytest.mark.feature
def test_integral_drift_property():
    result = check_integral_drift(seed=3, count=12)
    assert result.passed, result.failures


@pytest.mark.unit
def test_run_all_without_numerics():
    results = run_all(seed=4, count=4)
    assert [r.name for r in results] == ["class invariant", "standardization"]
    assert str(results[0]) == "class invariant: 8 runs, ok"
