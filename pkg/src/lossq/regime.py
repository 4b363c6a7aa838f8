from enum import Enum

# |x - 1| below this counts as critical, for both gamma_1 and rho.
CRITICAL_TOL = 1e-9


class Regime(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"
    HEAVY_TRAFFIC_C = "heavy_traffic_C"
    HEAVY_TRAFFIC_ZERO = "heavy_traffic_zero"


def classify_load(x: float, tol: float = CRITICAL_TOL) -> Regime:
    """Three-way split of a load-like quantity around 1."""
    if abs(x - 1.0) < tol:
        return Regime.CRITICAL
    return Regime.SUBCRITICAL if x < 1.0 else Regime.SUPERCRITICAL
