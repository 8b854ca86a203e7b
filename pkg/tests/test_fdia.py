"""Attack construction, the two closure conditions, and command-map admissibility."""

import json
import math

import numpy as np
import pytest

from fdia_lab.fdia import (
    AffineAttack,
    admissible_su,
    attack_command,
    attack_from_dict,
    attack_state,
    attack_to_dict,
    build_reflection,
    build_scaling,
    check_condition1,
    check_condition2,
    identity_attack,
    load_attack,
    save_attack,
)
from fdia_lab.kinematics import BodyVelocity, Posture

P0 = Posture(0.0, 0.02, 0.0)
P0_TILTED = Posture(0.0, 0.02, math.pi / 6)


def test_reflection_about_initial_x_axis():
    a = build_reflection(1.0, P0)
    assert np.array_equal(a.s_x, [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    assert np.array_equal(a.d_x, [0.0, 0.04, 0.0])
    assert np.array_equal(a.s_u, [[1.0, 0.0], [0.0, -1.0]])
    assert np.array_equal(a.d_u, [0.0, 0.0])


def test_reflection_about_tilted_heading():
    a = build_reflection(1.0, P0_TILTED)
    root3 = math.sqrt(3.0)
    want_sx = [[0.5, root3 / 2, 0.0], [root3 / 2, -0.5, 0.0], [0.0, 0.0, -1.0]]
    assert np.allclose(a.s_x, want_sx, atol=1e-15)
    assert np.allclose(a.d_x, [-0.01 * root3, 0.03, math.pi / 3], atol=1e-15)
    assert np.array_equal(a.s_u, [[1.0, 0.0], [0.0, -1.0]])


def test_reflection_from_origin():
    a = build_reflection(1.0, Posture(0.0, 0.0, 0.0))
    assert np.array_equal(a.s_x, np.diag([1.0, -1.0, -1.0]))
    assert np.array_equal(a.d_x, np.zeros(3))


def test_scaling_matrices():
    a = build_scaling(0.5, P0)
    assert np.array_equal(a.s_x, np.diag([2.0, 2.0, 1.0]))
    assert np.array_equal(a.d_x, [0.0, -0.02, 0.0])
    assert np.array_equal(a.s_u, [[0.5, 0.0], [0.0, 1.0]])

    a = build_scaling(2.0, Posture(1.0, 0.0, 0.0))
    assert np.array_equal(a.s_x, np.diag([0.5, 0.5, 1.0]))
    assert np.array_equal(a.d_x, [0.5, 0.0, 0.0])


def test_scaling_at_unit_beta_is_identity():
    rng = np.random.default_rng(31)
    for _ in range(20):
        p0 = Posture(*(float(c) for c in rng.uniform(-2, 2, 3)))
        a = build_scaling(1.0, p0)
        assert np.array_equal(a.s_x, np.eye(3))
        assert np.array_equal(a.d_x, np.zeros(3))
        assert np.array_equal(a.s_u, np.eye(2))


def test_builders_reject_zero_beta():
    with pytest.raises(ValueError):
        build_reflection(0.0, P0)
    with pytest.raises(ValueError):
        build_scaling(0.0, P0)


def test_attack_requires_invertible_state_map():
    singular = np.diag([1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        AffineAttack(singular, np.zeros(3), np.eye(2), np.zeros(2))


def test_attack_state_examples():
    ident = identity_attack()
    p = Posture(0.3, -0.7, 2.2)
    assert attack_state(ident, p) == p

    s1 = build_reflection(1.0, P0)
    mapped = attack_state(s1, P0)
    assert abs(mapped.x - P0.x) <= 1e-15
    assert abs(mapped.y - P0.y) <= 1e-15
    assert abs(mapped.theta - P0.theta) <= 1e-15

    s2 = build_scaling(0.5, P0)
    mapped = attack_state(s2, Posture(0.1, 0.02, 0.5))
    assert abs(mapped.x - 0.2) <= 1e-15
    assert abs(mapped.y - 0.02) <= 1e-15
    assert abs(mapped.theta - 0.5) <= 1e-15


def test_attack_command_examples():
    q = BodyVelocity(0.02, 0.3)
    s1 = build_reflection(1.0, P0)
    out = attack_command(s1, q)
    assert (out.v, out.omega) == (0.02, -0.3)

    s2 = build_scaling(0.5, P0)
    out = attack_command(s2, q)
    assert (out.v, out.omega) == (0.01, 0.3)

    assert attack_command(identity_attack(), q) == q


def test_attack_state_is_affine():
    rng = np.random.default_rng(32)
    for _ in range(30):
        p0 = Posture(*(float(c) for c in rng.uniform(-1, 1, 3)))
        beta = float(rng.uniform(0.2, 2.0))
        a = build_reflection(beta, p0) if rng.random() < 0.5 else build_scaling(beta, p0)
        p = rng.uniform(-2, 2, 3)
        p2 = rng.uniform(-2, 2, 3)
        lam = float(rng.uniform(-1.0, 2.0))
        blended = attack_state(a, Posture(*(float(c) for c in lam * p + (1 - lam) * p2)))
        part = lam * attack_state(a, Posture(*(float(c) for c in p))).as_array() + (
            1 - lam
        ) * attack_state(a, Posture(*(float(c) for c in p2))).as_array()
        assert np.max(np.abs(blended.as_array() - part)) <= 1e-12


def test_reflection_mirrors_heading():
    """The observed heading is the reflection of the actual one about theta0."""
    rng = np.random.default_rng(33)
    for _ in range(30):
        theta0 = float(rng.uniform(-2, 2))
        a = build_reflection(1.0, Posture(0.0, 0.02, theta0))
        theta = float(rng.uniform(-10, 10))
        mapped = attack_state(a, Posture(0.0, 0.0, theta))
        assert abs(mapped.theta - (2.0 * theta0 - theta)) <= 1e-12


def test_condition1_examples():
    s3 = build_reflection(1.0, P0_TILTED)
    assert check_condition1(s3, P0_TILTED) <= 1e-12

    s1 = build_reflection(1.0, P0)
    assert abs(check_condition1(s1, Posture(0.0, 0.0, 0.0)) - 0.04) <= 1e-15

    assert check_condition1(identity_attack(), Posture(0.5, -0.5, 1.0)) == 0.0


def test_conditions_hold_for_every_built_attack():
    rng = np.random.default_rng(34)
    for i in range(20):
        p0 = Posture(*(float(c) for c in rng.uniform(-1, 1, 3)))
        beta = float(rng.uniform(0.2, 3.0)) * (1.0 if rng.random() < 0.5 else -1.0)
        builder = build_reflection if i % 2 == 0 else build_scaling
        a = builder(beta, p0)
        assert check_condition1(a, p0) <= 1e-12
        assert check_condition2(a, n_samples=1000, seed=i) <= 1e-10


def test_inadmissible_command_maps_break_condition2():
    base = build_reflection(1.0, P0)
    coupled = np.array([[1.0, 0.1], [0.0, 1.0]])
    bad = AffineAttack(base.s_x, base.d_x, coupled, base.d_u)
    assert check_condition2(bad, n_samples=1000, seed=0) > 0.01

    wrong_turn = np.diag([1.0, 2.0])
    bad = AffineAttack(base.s_x, base.d_x, wrong_turn, base.d_u)
    assert check_condition2(bad, n_samples=1000, seed=0) > 1e-3


def test_admissible_su_verdicts():
    ok = admissible_su(np.diag([0.5, 1.0]))
    assert ok.admissible and ok.beta11 == 0.5

    ok = admissible_su(np.diag([1.0, -1.0]))
    assert ok.admissible and ok.beta11 == 1.0

    for matrix, reason in (
        (np.array([[1.0, 0.1], [0.0, 1.0]]), "beta12"),
        (np.array([[1.0, 0.0], [0.1, 1.0]]), "beta21"),
        (np.diag([1.0, 2.0]), "beta22"),
        (np.diag([0.0, 1.0]), "beta11"),
    ):
        verdict = admissible_su(matrix)
        assert not verdict.admissible
        assert reason in verdict.reason


def test_builders_fix_du_to_zero():
    rng = np.random.default_rng(35)
    for _ in range(10):
        p0 = Posture(*(float(c) for c in rng.uniform(-1, 1, 3)))
        assert np.array_equal(build_reflection(2.0, p0).d_u, np.zeros(2))
        assert np.array_equal(build_scaling(0.3, p0).d_u, np.zeros(2))


def test_serialization_round_trip(tmp_path):
    a = build_reflection(1.0, P0_TILTED)
    d = attack_to_dict(a)
    assert len(d["s_x"]) == 9 and len(d["d_x"]) == 3
    assert len(d["s_u"]) == 4 and len(d["d_u"]) == 2
    back = attack_from_dict(d)
    assert np.array_equal(back.s_x, a.s_x) and np.array_equal(back.d_x, a.d_x)
    assert np.array_equal(back.s_u, a.s_u) and np.array_equal(back.d_u, a.d_u)
    assert back.kind == a.kind and back.beta11 == a.beta11

    path = tmp_path / "attack.json"
    save_attack(a, path)
    loaded = load_attack(path)
    assert np.array_equal(loaded.s_x, a.s_x)
    assert json.loads(path.read_text())["kind"] == a.kind
