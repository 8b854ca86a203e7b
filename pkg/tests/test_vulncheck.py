"""Tests for the scalar-family vulnerability checker."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fdia_lab.vulncheck import (
    CLASS_CONTINUOUS,
    CLASS_DISCRETE,
    CLASS_TRIVIAL,
    TAG_COSINE,
    TAG_EXPONENTIAL,
    TAG_LINEAR,
    TAG_QUADRATIC,
    TAG_SINE,
    ScalarFamily,
    attack_residual,
    classify,
    default_families,
    default_grid,
    verdict_table,
)


@pytest.fixture(scope="module")
def verdicts():
    return {v.family: v for v in verdict_table()}


def test_family_validation():
    with pytest.raises(ValueError):
        ScalarFamily("Cubic")
    with pytest.raises(ValueError):
        ScalarFamily(TAG_LINEAR, c=0.0)
    with pytest.raises(ValueError):
        ScalarFamily(TAG_EXPONENTIAL, c=float("nan"))
    # trig families ignore c, so a zero there is harmless
    ScalarFamily(TAG_COSINE, c=0.0)


def test_attack_residual_examples():
    lin = ScalarFamily(TAG_LINEAR, c=3.0)
    assert attack_residual(lin, 2.0, 0.5, default_grid(lin)) <= 1e-12

    cos = ScalarFamily(TAG_COSINE)
    assert attack_residual(cos, 1.0, -1.0, default_grid(cos)) <= 1e-12
    assert abs(attack_residual(cos, -1.0, -1.0, default_grid(cos)) - 2.0) <= 1e-12

    sin = ScalarFamily(TAG_SINE)
    assert attack_residual(sin, -1.0, -1.0, default_grid(sin)) <= 1e-12
    assert abs(attack_residual(sin, 1.0, -1.0, default_grid(sin)) - 2.0) <= 1e-12

    exp = ScalarFamily(TAG_EXPONENTIAL)
    assert attack_residual(exp, 2.0, 1.0, default_grid(exp)) > 1.0

    with pytest.raises(ValueError):
        attack_residual(lin, 1.0, 1.0, np.array([]))


def test_classify_validation():
    with pytest.raises(ValueError):
        classify(ScalarFamily(TAG_LINEAR), tol=0.0)
    with pytest.raises(ValueError):
        classify(ScalarFamily(TAG_LINEAR), step=-0.001)


def test_table_covers_default_families(verdicts):
    assert [f.tag for f in default_families()] == [
        TAG_LINEAR, TAG_COSINE, TAG_SINE, TAG_QUADRATIC, TAG_EXPONENTIAL,
    ]
    assert set(verdicts) == {TAG_LINEAR, TAG_COSINE, TAG_SINE, TAG_QUADRATIC, TAG_EXPONENTIAL}


def test_linear_family_is_continuously_vulnerable(verdicts):
    v = verdicts[TAG_LINEAR]
    assert v.kind == CLASS_CONTINUOUS
    assert v.constraint == "alpha*beta = 1"
    assert len(v.candidates) >= 10
    for alpha, beta in v.candidates:
        assert abs(alpha * beta - 1.0) <= 1e-9


def test_quadratic_family_is_continuously_vulnerable(verdicts):
    v = verdicts[TAG_QUADRATIC]
    assert v.kind == CLASS_CONTINUOUS
    assert v.constraint == "alpha*beta^2 = 1"
    assert len(v.candidates) >= 10
    for alpha, beta in v.candidates:
        assert abs(alpha * beta * beta - 1.0) <= 1e-9


def test_cosine_admits_only_the_even_reflection(verdicts):
    v = verdicts[TAG_COSINE]
    assert v.kind == CLASS_DISCRETE
    assert v.constraint is None
    assert len(v.candidates) == 1
    alpha, beta = v.candidates[0]
    assert abs(alpha - 1.0) <= 1e-6
    assert abs(beta + 1.0) <= 1e-9


def test_sine_admits_only_the_odd_reflection(verdicts):
    v = verdicts[TAG_SINE]
    assert v.kind == CLASS_DISCRETE
    assert v.constraint is None
    assert len(v.candidates) == 1
    alpha, beta = v.candidates[0]
    assert abs(alpha + 1.0) <= 1e-6
    assert abs(beta + 1.0) <= 1e-9


def test_exponential_is_trivial_only(verdicts):
    v = verdicts[TAG_EXPONENTIAL]
    assert v.kind == CLASS_TRIVIAL
    assert v.candidates == []
    assert math.isfinite(v.residual)
    assert v.residual > 1e-4


def test_identity_is_never_reported(verdicts):
    for v in verdicts.values():
        for alpha, beta in v.candidates:
            assert not (abs(alpha - 1.0) <= 1e-6 and abs(beta - 1.0) <= 5e-4)


def test_candidates_pass_numeric_substitution(verdicts):
    # Every reported pair must actually reproduce the function on the grid;
    # the verdict is only as good as this substitution.
    for fam in default_families():
        v = verdicts[fam.tag]
        grid = default_grid(fam)
        for alpha, beta in v.candidates[:50]:
            assert attack_residual(fam, alpha, beta, grid) <= 1e-9


def test_verdicts_do_not_depend_on_the_scale_constant():
    for c in (3.0, -2.0, 0.5, 7.0):
        lin = classify(ScalarFamily(TAG_LINEAR, c=c))
        assert lin.kind == CLASS_CONTINUOUS
        assert lin.constraint == "alpha*beta = 1"
        quad = classify(ScalarFamily(TAG_QUADRATIC, c=c))
        assert quad.kind == CLASS_CONTINUOUS
        assert quad.constraint == "alpha*beta^2 = 1"
    for c in (2.0, 0.5):
        assert classify(ScalarFamily(TAG_EXPONENTIAL, c=c)).kind == CLASS_TRIVIAL


def test_loose_tolerance_cannot_fake_an_exponential_family():
    # Even at a tolerance just under its best nontrivial residual, the
    # exponential family admits nothing; at a tolerance above it, whatever
    # appears is a numerical artifact of the scan, not a structural family.
    v = verdict_table()[4]
    tight = classify(ScalarFamily(TAG_EXPONENTIAL), tol=v.residual * 0.99)
    assert tight.kind == CLASS_TRIVIAL
