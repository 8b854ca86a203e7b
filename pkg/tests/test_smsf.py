"""Tests for signature polynomials, affine channel fits, and the residual monitor."""

from __future__ import annotations

import numpy as np
import pytest

from fdia_lab.fdia import build_reflection, build_scaling
from fdia_lab.kinematics import Posture
from fdia_lab.simloop import SimConfig, run
from fdia_lab.smsf import (
    AffineFit,
    DetectionConfig,
    PolySignature,
    affine_fit,
    default_signature,
    eval_signature,
    load_signature,
    monitor,
    resilience_check,
    save_signature,
    signature_from_dict,
    signature_to_dict,
    validate_smsf,
    windowed_detect,
)


@pytest.fixture(scope="module")
def origin_trace():
    """Short nominal run started exactly on the reference origin."""
    return run(SimConfig(p0=Posture(0.0, 0.0, 0.0), duration=1.0))


# ---------------------------------------------------------------------------
# polynomial construction and evaluation


def test_default_signature_coefficients():
    sig = default_signature()
    assert sig.max_degree == 4
    assert sig.terms == {
        (0, 2): 25.0,
        (0, 4): 1.0,
        (1, 2): -10.0,
        (2, 0): 1.0,
        (2, 1): -100.0,
        (2, 2): 2501.0,
        (4, 0): 1.0,
    }
    assert (0, 0) not in sig.terms


def test_default_signature_point_values():
    sig = default_signature()
    assert eval_signature(sig, 0.0, 0.0) == 0.0
    assert eval_signature(sig, 1.0, 0.0) == 2.0
    assert eval_signature(sig, 1.0, 1.0) == 2419.0


def test_eval_returns_float_for_scalars():
    val = eval_signature(default_signature(), 0.25, -0.5)
    assert isinstance(val, float)


def test_eval_broadcasts_over_arrays():
    sig = PolySignature({(2, 0): 1.0, (0, 2): 1.0}, max_degree=2)
    x = np.linspace(-1.0, 1.0, 7)
    y = np.linspace(0.0, 2.0, 7)
    vals = eval_signature(sig, x, y)
    assert vals.shape == (7,)
    np.testing.assert_array_equal(vals, x**2 + y**2)
    gx, gy = np.meshgrid(x, y)
    grid = eval_signature(sig, gx, gy)
    assert grid.shape == (7, 7)
    np.testing.assert_array_equal(grid, gx**2 + gy**2)


def test_terms_are_stored_in_sorted_order():
    sig = PolySignature({(2, 2): 3.0, (0, 1): 1.0, (1, 0): 2.0})
    assert list(sig.terms) == [(0, 1), (1, 0), (2, 2)]


def test_constructor_rejects_bad_terms():
    with pytest.raises(ValueError):
        PolySignature({(3, 2): 1.0}, max_degree=4)
    with pytest.raises(ValueError):
        PolySignature({(-1, 0): 1.0})
    with pytest.raises(ValueError):
        PolySignature({(1, 0): float("nan")})
    with pytest.raises(ValueError):
        PolySignature({(1, 0): 1.0}, max_degree=0)


def test_validate_accepts_default_signature():
    assert validate_smsf(default_signature()) is True


def test_validate_rejects_constant_term():
    sig = PolySignature({(0, 0): 0.5, (2, 0): 1.0})
    with pytest.raises(ValueError, match="constant term"):
        validate_smsf(sig)


def test_validate_rejects_negative_polynomial():
    sig = PolySignature({(1, 0): 1.0})
    with pytest.raises(ValueError, match="negative"):
        validate_smsf(sig)


def test_default_signature_is_zero_only_at_origin_on_grid():
    axis = np.linspace(-1.0, 1.0, 201)
    gx, gy = np.meshgrid(axis, axis)
    vals = eval_signature(default_signature(), gx, gy)
    assert float(vals.min()) == 0.0
    zero_rows, zero_cols = np.nonzero(vals == 0.0)
    assert len(zero_rows) == 1
    assert axis[zero_cols[0]] == 0.0 and axis[zero_rows[0]] == 0.0


# ---------------------------------------------------------------------------
# affine channel fits


def test_affine_fit_identity_pairs():
    v = np.linspace(-3.0, 5.0, 40)
    fit = affine_fit(np.column_stack([v, v]))
    assert abs(fit.s_phi - 1.0) <= 1e-9
    assert abs(fit.d_phi) <= 1e-9
    assert fit.nrmse <= 1e-12


def test_affine_fit_recovers_known_channel():
    rng = np.random.default_rng(7)
    for _ in range(20):
        s = rng.uniform(-4.0, 4.0)
        d = rng.uniform(-2.0, 2.0)
        if abs(s) < 0.1:
            continue
        phi_in = rng.uniform(-1.0, 1.0, size=60)
        fit = affine_fit(np.column_stack([phi_in, s * phi_in + d]))
        assert abs(fit.s_phi - s) <= 1e-9
        assert abs(fit.d_phi - d) <= 1e-9
        assert fit.nrmse <= 1e-10


def test_affine_fit_input_validation():
    with pytest.raises(ValueError):
        affine_fit(np.array([[1.0, 2.0]]))
    with pytest.raises(ValueError):
        affine_fit(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError, match="degenerate"):
        affine_fit(np.array([[2.0, 1.0], [2.0, 5.0], [2.0, 9.0]]))


def test_squared_radius_scales_quadratically_under_position_scaling():
    # For Phi = x^2 + y^2, pairs (Phi(p), Phi(alpha p)) lie exactly on the
    # channel s_phi = alpha^2, d_phi = 0.
    sig = PolySignature({(2, 0): 1.0, (0, 2): 1.0}, max_degree=2)
    axis = np.linspace(-1.0, 1.0, 21)
    gx, gy = np.meshgrid(axis, axis)
    rng = np.random.default_rng(21)
    for _ in range(20):
        alpha = rng.uniform(0.3, 2.5)
        phi_in = eval_signature(sig, gx, gy).ravel()
        phi_out = eval_signature(sig, alpha * gx, alpha * gy).ravel()
        fit = affine_fit(np.column_stack([phi_in, phi_out]))
        assert abs(fit.s_phi - alpha**2) <= 1e-9
        assert abs(fit.d_phi) <= 1e-9
        assert fit.nrmse <= 1e-10


# ---------------------------------------------------------------------------
# resilience verdicts


def test_default_signature_resists_builtin_attacks(scenario_runs):
    nominal = scenario_runs["nominal"].nominal
    p0 = Posture(0.0, 0.02, 0.0)
    sig = default_signature()
    attacks = [
        build_reflection(0.5, p0),
        build_reflection(1.0, p0),
        build_reflection(2.0, p0),
        build_scaling(0.5, p0),
        build_scaling(2.0, p0),
    ]
    for attack in attacks:
        res = resilience_check(sig, attack, nominal)
        assert res.resilient
        assert res.fit.nrmse > 0.05


def test_default_signature_resists_tilted_reflection(scenario_runs):
    bundle = scenario_runs["scenario3"]
    res = resilience_check(default_signature(), bundle.attack, bundle.nominal)
    assert res.resilient
    assert res.fit.nrmse > 0.05


def test_squared_radius_is_vulnerable_to_origin_scaling(origin_trace):
    sig = PolySignature({(2, 0): 1.0, (0, 2): 1.0}, max_degree=2)
    origin = Posture(0.0, 0.0, 0.0)
    for beta, s_expected in ((2.0, 0.25), (0.5, 4.0)):
        res = resilience_check(sig, build_scaling(beta, origin), origin_trace)
        assert not res.resilient
        assert res.fit.nrmse <= 1e-9
        assert abs(res.fit.s_phi - s_expected) <= 1e-9
        assert abs(res.fit.d_phi) <= 1e-9


def test_resilience_check_rejects_bad_grid_arguments(scenario_runs):
    bundle = scenario_runs["scenario1"]
    sig = default_signature()
    with pytest.raises(ValueError):
        resilience_check(sig, bundle.attack, bundle.nominal, half_width=0.0)
    with pytest.raises(ValueError):
        resilience_check(sig, bundle.attack, bundle.nominal, half_width=float("inf"))
    with pytest.raises(ValueError):
        resilience_check(sig, bundle.attack, bundle.nominal, grid_n=1)


# ---------------------------------------------------------------------------
# residual monitor


def test_detection_config_validation():
    cfg = DetectionConfig()
    assert cfg.epsilon == 1e-6
    assert cfg.window == 10
    with pytest.raises(ValueError):
        DetectionConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        DetectionConfig(window=0)


def test_windowed_detect_examples():
    t = np.arange(6) * 0.5
    exceed = np.array([False, True, True, False, True, True])
    assert windowed_detect(t, exceed, 2) == t[2]
    assert windowed_detect(t, exceed, 3) is None
    assert windowed_detect(t, np.zeros(6, dtype=bool), 1) is None
    assert windowed_detect(t, np.ones(3, dtype=bool), 5) is None


def test_monitor_is_silent_on_nominal_run(scenario_runs):
    nominal = scenario_runs["nominal"].nominal
    result = monitor(nominal, default_signature())
    assert not result.flag
    assert result.first_exceed_t is None
    assert result.detect_t is None
    np.testing.assert_array_equal(result.residual, np.zeros_like(result.residual))


def test_monitor_recomputes_from_positions(scenario_runs):
    # The verdict depends on the logged positions, not the logged phi columns,
    # so a different signature still reads clean on an honest run.
    nominal = scenario_runs["nominal"].nominal
    other = PolySignature({(2, 0): 3.0, (0, 2): 7.0}, max_degree=2)
    result = monitor(nominal, other)
    assert not result.flag
    assert float(result.residual.max()) == 0.0


def test_monitor_flags_attacked_runs_within_one_second(scenario_runs):
    for name in ("scenario1", "scenario2"):
        attacked = scenario_runs[name].attacked
        result = monitor(attacked, scenario_runs[name].scenario.signature)
        assert result.flag
        assert result.first_exceed_t is not None
        assert result.detect_t is not None and result.detect_t <= 1.0


def test_monitor_scaling_residual_dominates_reflection(scenario_runs):
    sig = default_signature()
    peak1 = float(monitor(scenario_runs["scenario1"].attacked, sig).residual.max())
    peak2 = float(monitor(scenario_runs["scenario2"].attacked, sig).residual.max())
    assert peak2 > peak1


def test_monitor_catches_scalar_channel_tampering(scenario_runs):
    # Even on an undetectable state attack, a sign-flipping channel on the
    # signature stream leaves an immediate residual.
    attacked = scenario_runs["scenario1"].attacked
    result = monitor(attacked, default_signature(), channel=AffineFit(-1.0, 0.0, 0.0))
    assert result.flag


def test_monitor_catches_constant_offset_on_signature_stream(origin_trace):
    # Phi(0,0) = 0 anchors the residual, so even a tiny additive offset on the
    # stream exceeds epsilon from the first sample.
    result = monitor(origin_trace, default_signature(), channel=AffineFit(1.0, 1e-3, 0.0))
    assert result.flag
    assert result.first_exceed_t == 0.0
    assert result.detect_t == float(origin_trace.t[DetectionConfig().window - 1])


# ---------------------------------------------------------------------------
# serialization


def test_signature_dict_round_trip():
    sig = default_signature()
    d = signature_to_dict(sig)
    assert d["max_degree"] == 4
    assert list(d["terms"]) == sorted(d["terms"])
    assert d["terms"]["2,2"] == 2501.0
    back = signature_from_dict(d)
    assert back.terms == sig.terms
    assert back.max_degree == sig.max_degree


def test_signature_file_round_trip(tmp_path):
    sig = PolySignature({(2, 0): 1.5, (0, 2): 2.5, (1, 1): -0.25}, max_degree=3)
    path = tmp_path / "sig.json"
    save_signature(sig, path)
    back = load_signature(path)
    assert back.terms == sig.terms
    assert back.max_degree == 3
