"""Named experiment setups: builtins, JSON loading, and one-call execution.

A scenario bundles a closed-loop configuration, an optional attack family
tag, the monitored signature, and detector settings under a stable name and
seed. Loading validates the bundle: the signature must pass its structural
checks and a declared attack must satisfy both undetectability conditions
(initial-state consistency and kinematic closure) before anything runs.

Builtins:
  nominal    no attack, p0 = (0, 0.02, 0)
  scenario1  reflection about the start pose, beta11 = 1
  scenario2  similarity scaling about the origin, beta11 = 0.5
  scenario3  reflection with a rotated start pose, theta0 = pi/6
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .fdia import (
    KIND_CUSTOM,
    KIND_IDENTITY,
    KIND_REFLECTION,
    KIND_SCALING,
    AffineAttack,
    AttackKind,
    build_reflection,
    build_scaling,
    check_condition1,
    check_condition2,
    identity_attack,
    save_attack,
)
from .kinematics import Posture
from .simloop import SimConfig, run, undetectability_report
from .smsf import (
    DetectionConfig,
    PolySignature,
    default_signature,
    monitor,
    signature_from_dict,
    signature_to_dict,
    validate_smsf,
)
from .tracking import ControllerGains, RefConfig

_BUILTINS = ("nominal", "scenario1", "scenario2", "scenario3")

_CONDITION1_TOL = 1e-12
_CONDITION2_TOL = 1e-10
_UNDETECTABLE_TOL = 1e-9

_TOP_KEYS = {"name", "seed", "p0", "dt", "duration", "log_stride",
             "ref", "gains", "signature", "attack", "detection"}
_REF_KEYS = {"v_ref", "omega_amp", "omega_period", "duration"}
_GAIN_KEYS = {"kx", "ky", "ktheta"}
_DET_KEYS = {"epsilon", "window"}
_ATTACK_KEYS = {"kind", "beta11"}


class ScenarioError(Exception):
    """Scenario is unknown, malformed, or fails its self-checks."""


@dataclass(frozen=True)
class Scenario:
    """A named, seeded, self-validating experiment setup."""

    name: str
    sim: SimConfig
    attack_kind: AttackKind | None
    signature: PolySignature
    detection: DetectionConfig
    seed: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ScenarioError(f"scenario name must be a non-empty string, got {self.name!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ScenarioError(f"seed must be a non-negative int, got {self.seed!r}")


def builtin_names() -> tuple:
    return _BUILTINS


def _builtin(name: str) -> Scenario:
    recipes = {
        "nominal": (0.0, None, 100),
        "scenario1": (0.0, AttackKind(KIND_REFLECTION, 1.0), 101),
        "scenario2": (0.0, AttackKind(KIND_SCALING, 0.5), 102),
        "scenario3": (math.pi / 6.0, AttackKind(KIND_REFLECTION, 1.0), 103),
    }
    theta0, kind, seed = recipes[name]
    sim = SimConfig(p0=Posture(0.0, 0.02, theta0))
    return Scenario(name, sim, kind, default_signature(), DetectionConfig(), seed)


def build_attack(kind: AttackKind | None, p0: Posture) -> AffineAttack | None:
    """Materialize an attack family tag at a start pose; None stays None."""
    if kind is None:
        return None
    if kind.tag == KIND_REFLECTION:
        return build_reflection(kind.beta11, p0)
    if kind.tag == KIND_SCALING:
        return build_scaling(kind.beta11, p0)
    if kind.tag == KIND_IDENTITY:
        return identity_attack()
    raise ScenarioError(
        f"attack kind {kind.tag!r} has no builder; supply explicit matrices via the attack API"
    )


def validate_scenario(sc: Scenario) -> AffineAttack | None:
    """Run the self-checks; returns the materialized attack (or None).

    The signature must have no constant term and be nonnegative on the
    operational grid. A declared attack must satisfy the initial-state
    consistency condition to 1e-12 and the kinematic closure condition to
    1e-10 over a seeded random sample of states and commands.
    """
    try:
        validate_smsf(sc.signature)
    except ValueError as exc:
        raise ScenarioError(f"scenario {sc.name!r}: invalid signature: {exc}") from exc
    attack = build_attack(sc.attack_kind, sc.sim.p0)
    if attack is not None:
        r1 = check_condition1(attack, sc.sim.p0)
        if r1 > _CONDITION1_TOL:
            raise ScenarioError(
                f"scenario {sc.name!r}: initial-state consistency residual {r1:.3e} > {_CONDITION1_TOL}"
            )
        r2 = check_condition2(attack, n_samples=1000, seed=sc.seed)
        if r2 > _CONDITION2_TOL:
            raise ScenarioError(
                f"scenario {sc.name!r}: kinematic closure residual {r2:.3e} > {_CONDITION2_TOL}"
            )
    return attack


def scenario_to_dict(sc: Scenario) -> dict:
    """JSON-ready form; round-trips through scenario_from_dict."""
    return {
        "name": sc.name,
        "seed": sc.seed,
        "p0": [sc.sim.p0.x, sc.sim.p0.y, sc.sim.p0.theta],
        "dt": sc.sim.dt,
        "duration": sc.sim.duration,
        "log_stride": sc.sim.log_stride,
        "ref": {
            "v_ref": sc.sim.ref.v_ref,
            "omega_amp": sc.sim.ref.omega_amp,
            "omega_period": sc.sim.ref.omega_period,
            "duration": sc.sim.ref.duration,
        },
        "gains": {"kx": sc.sim.gains.kx, "ky": sc.sim.gains.ky, "ktheta": sc.sim.gains.ktheta},
        "signature": signature_to_dict(sc.signature),
        "attack": None if sc.attack_kind is None
        else {"kind": sc.attack_kind.tag, "beta11": sc.attack_kind.beta11},
        "detection": {"epsilon": sc.detection.epsilon, "window": sc.detection.window},
    }


def _require_keys(d: dict, allowed: set, where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ScenarioError(f"unknown {where} keys: {sorted(extra)}")


def scenario_from_dict(d: dict, fallback_name: str = "custom") -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError(f"scenario document must be an object, got {type(d).__name__}")
    _require_keys(d, _TOP_KEYS, "scenario")
    if "seed" not in d:
        raise ScenarioError("scenario document must declare a seed")
    name = d.get("name", fallback_name)
    seed = d["seed"]

    p0_raw = d.get("p0", [0.0, 0.02, 0.0])
    if not (isinstance(p0_raw, (list, tuple)) and len(p0_raw) == 3):
        raise ScenarioError(f"p0 must be a list of three numbers, got {p0_raw!r}")
    p0 = Posture(float(p0_raw[0]), float(p0_raw[1]), float(p0_raw[2]))

    duration = float(d.get("duration", 30.0))
    ref_raw = dict(d.get("ref", {}))
    _require_keys(ref_raw, _REF_KEYS, "ref")
    ref_raw.setdefault("duration", duration)
    gains_raw = d.get("gains", {})
    _require_keys(gains_raw, _GAIN_KEYS, "gains")
    det_raw = d.get("detection", {})
    _require_keys(det_raw, _DET_KEYS, "detection")
    try:
        ref = RefConfig(**{k: float(v) for k, v in ref_raw.items()})
        gains = ControllerGains(**{k: float(v) for k, v in gains_raw.items()})
        det_kwargs = dict(det_raw)
        if "epsilon" in det_kwargs:
            det_kwargs["epsilon"] = float(det_kwargs["epsilon"])
        if "window" in det_kwargs:
            det_kwargs["window"] = int(det_kwargs["window"])
        detection = DetectionConfig(**det_kwargs)
        sim = SimConfig(ref=ref, gains=gains, p0=p0, dt=float(d.get("dt", 0.01)),
                        log_stride=int(d.get("log_stride", 2)), duration=duration)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario settings: {exc}") from exc

    sig_raw = d.get("signature", "default")
    if sig_raw == "default":
        signature = default_signature()
    elif isinstance(sig_raw, dict):
        try:
            signature = signature_from_dict(sig_raw)
        except (TypeError, ValueError, KeyError) as exc:
            raise ScenarioError(f"invalid signature: {exc}") from exc
    else:
        raise ScenarioError(f'signature must be "default" or an object, got {sig_raw!r}')

    attack_raw = d.get("attack")
    if attack_raw is None:
        attack_kind = None
    else:
        if not isinstance(attack_raw, dict) or "kind" not in attack_raw:
            raise ScenarioError(f"attack must be null or an object with a kind, got {attack_raw!r}")
        _require_keys(attack_raw, _ATTACK_KEYS, "attack")
        if attack_raw["kind"] == KIND_CUSTOM:
            raise ScenarioError(
                "custom attacks cannot be declared inline; use the attack file API"
            )
        try:
            attack_kind = AttackKind(attack_raw["kind"], float(attack_raw.get("beta11", 1.0)))
        except ValueError as exc:
            raise ScenarioError(f"invalid attack declaration: {exc}") from exc

    return Scenario(name, sim, attack_kind, signature, detection, seed)


def load_scenario(name_or_path) -> Scenario:
    """Resolve a builtin name or a JSON file path; validates before returning."""
    name = str(name_or_path)
    if name in _BUILTINS:
        sc = _builtin(name)
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise ScenarioError(
                f"unknown scenario {name!r}: not one of {_BUILTINS} and not a file"
            )
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
        sc = scenario_from_dict(doc, fallback_name=path.stem)
    validate_scenario(sc)
    return sc


def resolve_out_dir(name: str, out_dir=None) -> Path:
    """Output directory precedence: explicit arg, FDIA_LAB_OUT_DIR, ./runs/<name>."""
    if out_dir is not None:
        return Path(out_dir)
    env = os.environ.get("FDIA_LAB_OUT_DIR")
    if env:
        return Path(env) / name
    return Path("runs") / name


def run_scenario(name_or_path, out_dir=None) -> dict:
    """Execute a scenario end to end and write its artifact set.

    Artifacts (all deterministic, byte-identical across repeat runs):
      trace.csv    attacked closed-loop trace (the run itself when no attack)
      nominal.csv  unattacked shadow run from the same configuration
      attack.json  the applied channel (identity when no attack is declared)
      monitor.csv  residual stream with per-sample exceedance flags
      summary.json run metrics; see the "schema" field

    Returns the summary dict.
    """
    sc = load_scenario(name_or_path)
    attack = validate_scenario(sc)
    out = resolve_out_dir(sc.name, out_dir)
    out.mkdir(parents=True, exist_ok=True)

    attacked = run(sc.sim, attack, sc.signature)
    nominal = attacked if attack is None else run(sc.sim, None, sc.signature)
    report = undetectability_report(
        attacked, nominal, attack if attack is not None else identity_attack(),
        tol=_UNDETECTABLE_TOL,
    )
    mon = monitor(attacked, sc.signature, channel=None, cfg=sc.detection)

    attacked.to_csv(out / "trace.csv")
    nominal.to_csv(out / "nominal.csv")
    save_attack(attack if attack is not None else identity_attack(), out / "attack.json")
    exceed = mon.residual > sc.detection.epsilon
    with open(out / "monitor.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,residual,exceeds\n")
        for t, r, e in zip(mon.t, mon.residual, exceed):
            fh.write(f"{format(t, '.17g')},{format(r, '.17g')},{int(e)}\n")

    summary = {
        "schema": 1,
        "name": sc.name,
        "seed": sc.seed,
        "attack": None if sc.attack_kind is None
        else {"kind": sc.attack_kind.tag, "beta11": sc.attack_kind.beta11},
        "sup_obs_dev": report.sup_obs_dev,
        "sup_actual_dev": report.sup_actual_dev,
        "undetectable": report.undetectable,
        "detection": {
            "flag": mon.flag,
            "first_exceed_t": mon.first_exceed_t,
            "detect_t": mon.detect_t,
            "peak_residual": float(mon.residual.max()),
        },
        "lyapunov_final": float(attacked.V[-1]),
        "terminal_error": {
            "xe": float(attacked.xe[-1]),
            "ye": float(attacked.ye[-1]),
            "thetae": float(attacked.thetae[-1]),
        },
        "artifacts": {
            "trace": "trace.csv",
            "nominal": "nominal.csv",
            "attack": "attack.json",
            "monitor": "monitor.csv",
            "summary": "summary.json",
        },
    }
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
