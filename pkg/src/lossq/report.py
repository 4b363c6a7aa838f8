"""Command execution and CSV / JSON emission.

Every command produces a :class:`Result`: a table (header plus rows) and an
optional summary mapping.  CSV output is the table; JSON output is
``{"command": ..., "rows": [...], "summary": {...}}`` with the same field
names.  Floats are written with 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .asymptotics import (
    classify,
    ep_asymptote,
    er_asymptote,
    heavy_traffic,
    loss_asymptote,
)
from .busy_period import loss_probability, mixture_characteristics
from .config import RunConfig
from .packetization import zeta_pmf
from .redundancy import RedundancyScenario, argmin_loss, sweep, SWEEP_COLUMNS
from .regime import Regime
from .simulator import SimConfig, compare, run

ANALYZE_COLUMNS = ("K_or_mix", "e_t", "e_p", "e_m", "e_r", "pi")
ASYMPTOTE_COLUMNS = ("quantity", "exact", "predicted", "delta")
SIMULATE_COLUMNS = (
    "replication", "cycles", "e_t", "e_p", "e_m", "e_r", "pi",
    "se_e_t", "se_e_p", "se_e_m", "se_e_r", "se_pi",
)
COMPARE_COLUMNS = ("quantity", "estimate", "analytic", "z")


@dataclass
class Result:
    command: str
    columns: tuple
    rows: list
    summary: dict = field(default_factory=dict)
    passed: bool = True


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def to_csv(result: Result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _json_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        # JSON has no inf/nan literals
        return fmt_float(v) if math.isfinite(v) else json.dumps(fmt_float(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    if hasattr(v, "value"):
        return json.dumps(v.value)
    return json.dumps(str(v))


def to_json(result: Result) -> str:
    doc = {
        "command": result.command,
        "rows": [dict(zip(result.columns, row)) for row in result.rows],
        "summary": result.summary,
    }
    return _json_value(doc) + "\n"


def emit(result: Result, fmt: str) -> str:
    return to_csv(result) if fmt == "csv" else to_json(result)


def summary_json(result: Result) -> str:
    return _json_value(result.summary) + "\n"


# ---- commands --------------------------------------------------------------


def _zeta(cfg: RunConfig):
    return zeta_pmf(cfg.model.nu, cfg.model.N)


def analyze(cfg: RunConfig) -> Result:
    m = cfg.model
    zeta = _zeta(cfg)
    chars = mixture_characteristics(zeta, m.lam, m.dist, m.p)
    label = str(zeta.lower) if zeta.is_degenerate() else "mix"
    row = [label, chars.e_t, chars.e_p, chars.e_m, chars.e_r, loss_probability(chars)]
    return Result("analyze", ANALYZE_COLUMNS, [row], {"rho": chars.rho, "mean_zeta": zeta.mean})


def asymptote(cfg: RunConfig) -> Result:
    m = cfg.model
    zeta = _zeta(cfg)
    report = classify(m.lam, m.dist, zeta, m.p)
    exact = mixture_characteristics(zeta, m.lam, m.dist, m.p)
    if report.regime in (Regime.HEAVY_TRAFFIC_C, Regime.HEAVY_TRAFFIC_ZERO):
        ht = heavy_traffic(report.epsilon, report.C, report.rho2_tilde, report.mean_zeta)
        ep, er = ht.e_p, ht.e_r
    else:
        ep, er = ep_asymptote(m.lam, m.dist, zeta), er_asymptote(m.lam, m.dist, zeta)
    pi_limit = loss_asymptote(report, m.p, zeta)
    triples = (
        ("e_p", exact.e_p, ep),
        ("e_r", exact.e_r, er),
        ("pi", loss_probability(exact), pi_limit),
    )
    rows = [[name, ex, pr, ex - pr] for name, ex, pr in triples]
    summary = {
        "regime": report.regime.value,
        "rho": report.rho,
        "epsilon": report.epsilon,
        "mean_zeta": report.mean_zeta,
        "C": report.C,
        "D": report.D,
        "rho2": report.rho2,
        "rho2_tilde": report.rho2_tilde,
        "rho3": report.rho3,
        "phi": report.phi,
        "slope": report.slope,
        "pi_limit": pi_limit,
    }
    return Result("asymptote", ASYMPTOTE_COLUMNS, rows, summary)


def _sim_config(cfg: RunConfig) -> SimConfig:
    m, c = cfg.model, cfg.command
    return SimConfig(
        lam=m.lam, dist=m.dist, nu=m.nu, N=m.N, p=m.p, zeta_mode=c.zeta_mode,
        n_busy_periods=c.n_busy_periods, replications=c.replications, seed=c.seed,
    )


def _estimate_summary(est) -> dict:
    return {
        "n_cycles": est.n_cycles,
        "e_t": est.e_t, "e_p": est.e_p, "e_m": est.e_m, "e_r": est.e_r, "pi": est.pi_hat,
        "se_e_t": est.se_e_t, "se_e_p": est.se_e_p, "se_e_m": est.se_e_m,
        "se_e_r": est.se_e_r, "se_pi": est.se_pi,
        "arrivals": est.arrivals, "served": est.served,
        "refused": est.refused, "marked": est.marked,
        "conservation_violations": est.conservation_violations,
    }


def simulate(cfg: RunConfig) -> Result:
    sc = _sim_config(cfg)
    est = run(sc)
    rows = [
        [i, r.n_cycles, r.e_t, r.e_p, r.e_m, r.e_r, r.pi_hat,
         r.se_e_t, r.se_e_p, r.se_e_m, r.se_e_r, r.se_pi]
        for i, r in enumerate(est.per_replication)
    ]
    summary = {"seed": sc.seed, "zeta_mode": sc.zeta_mode.value, "rho": sc.rho}
    summary.update(_estimate_summary(est))
    return Result("simulate", SIMULATE_COLUMNS, rows, summary)


def compare_cmd(cfg: RunConfig) -> Result:
    sc = _sim_config(cfg)
    zeta = sc.zeta()
    est = run(sc, zeta)
    exact = mixture_characteristics(zeta, sc.lam, sc.dist, sc.p)
    rep = compare(est, exact, cfg.command.threshold)
    rows = [[k, rep.estimates[k], rep.analytic[k], rep.z[k]] for k in rep.z]
    summary = {
        "seed": sc.seed,
        "zeta_mode": sc.zeta_mode.value,
        "n_cycles": est.n_cycles,
        "threshold": rep.threshold,
        "passed": rep.passed,
    }
    return Result("compare", COMPARE_COLUMNS, rows, summary, passed=rep.passed)


def redundancy(cfg: RunConfig) -> Result:
    m, c = cfg.model, cfg.command
    base = RedundancyScenario(q=c.q, l=c.l, lam=m.lam, dist=m.dist, N=m.N, nu=m.nu)
    rows = sweep(base, range(c.k_range[0], c.k_range[1] + 1))
    table = [
        [r.k, r.p_breve, r.rho_breve, r.regime, r.pi_predicted, r.pi_exact, r.verdict]
        for r in rows
    ]
    return Result("redundancy", SWEEP_COLUMNS, table, {"argmin_k": argmin_loss(rows)})


COMMANDS = {
    "analyze": analyze,
    "asymptote": asymptote,
    "simulate": simulate,
    "compare": compare_cmd,
    "redundancy": redundancy,
}


def execute(cfg: RunConfig) -> Result:
    return COMMANDS[cfg.command.name](cfg)
