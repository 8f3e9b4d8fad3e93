"""Closed-loop scenarios: ACC single lane, ACC with overtaking, synthetic linear plant."""

from .config import KINDS, ScenarioConfig, with_params
from .idm import CollisionError, IdmParams, idm_accel, lead_profile
from .result import SimResult


def run_simulation(config: ScenarioConfig, seed: int | None = None) -> SimResult:
    """Run one scenario; ``seed`` overrides ``config.seed``."""
    seed = config.seed if seed is None else seed
    if config.kind == "synthetic_linear":
        from .synthetic import run_synthetic
        return run_synthetic(config, seed)
    from .acc import run_acc
    return run_acc(config, seed)


__all__ = ["KINDS", "ScenarioConfig", "with_params", "CollisionError", "IdmParams",
           "idm_accel", "lead_profile", "SimResult", "run_simulation"]
