"""Named check runners behind `todaflow verify`.

Each runner takes the run context and returns CheckRecords. Runners are
independent, so `run_checks` may fan them out over a thread pool; the result
is sorted, so the manifest does not depend on scheduling.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .config import CHECK_NAMES, RunConfig
from .errors import ConfigError
from .hierarchy import HierarchyPolynomial, spectral_drift
from .identities import (
    check_cocycle,
    check_flow_equivalence,
    check_generator,
    check_master_equations,
    check_pq,
    check_shift_commutation,
    check_vanishing_identity,
    check_zero_curvature,
    zero_curvature_order,
)
from .lattice import JacobiWindow, spectrum
from .reports import CheckRecord
from .weyl import check_m_evolution

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    config: RunConfig
    J: JacobiWindow
    poly: HierarchyPolynomial
    zs: List[complex]

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "RunContext":
        return cls(config=cfg, J=cfg.operator(), poly=cfg.polynomial(), zs=cfg.z_grid())

    @property
    def tol(self) -> Dict[str, float]:
        return self.config.tolerances


CheckRunner = Callable[[RunContext], List[CheckRecord]]


def _poly_params(poly: HierarchyPolynomial) -> Dict[str, object]:
    return {"p": poly.to_list()}


def run_master(ctx: RunContext) -> List[CheckRecord]:
    records = []
    for poly in ctx.config.identity_polynomials():
        worst = max(check_master_equations(ctx.J, n, poly).max for n in range(ctx.J.sites))
        records.append(CheckRecord.evaluate("master", _poly_params(poly), worst, ctx.tol["exact"]))
    return records


def run_vanishing(ctx: RunContext) -> List[CheckRecord]:
    records = []
    for poly in ctx.config.identity_polynomials():
        worst = max(check_vanishing_identity(ctx.J, n, poly) for n in range(ctx.J.sites))
        records.append(CheckRecord.evaluate("vanishing", _poly_params(poly), worst, ctx.tol["exact"]))
    return records


def run_pq(ctx: RunContext) -> List[CheckRecord]:
    records = []
    for poly in ctx.config.identity_polynomials():
        report = check_pq(ctx.J, poly)
        for measure, value in (
            ("p_minus_q", report.max_pq),
            ("p_site_variation", report.p_variation),
            ("q_site_variation", report.q_variation),
            ("p_recovery", report.p_error),
        ):
            params = dict(_poly_params(poly), measure=measure)
            records.append(CheckRecord.evaluate("pq", params, value, ctx.tol["exact"]))
    return records


def run_curvature(ctx: RunContext) -> List[CheckRecord]:
    cfg = ctx.config
    records = []
    orders: List[float] = []
    for z in ctx.zs:
        residual = check_zero_curvature(ctx.J, cfg.site, ctx.poly, z, cfg.fd_step)
        params = dict(_poly_params(ctx.poly), z=z, site=cfg.site, fd_step=cfg.fd_step)
        records.append(CheckRecord.evaluate("curvature", params, residual, ctx.tol["single"]))
        _, observed = zero_curvature_order(ctx.J, cfg.site, ctx.poly, z, cfg.curvature["steps"])
        orders.extend(observed)
    finite = [order for order in orders if np.isfinite(order)]
    if finite:
        # rounding-level residuals carry no order information
        spread = max(abs(order - 2.0) for order in finite)
        params = dict(_poly_params(ctx.poly), measure="order", steps=list(cfg.curvature["steps"]))
        records.append(CheckRecord.evaluate("curvature", params, spread, ctx.tol["order_band"]))
    return records


def run_cocycle(ctx: RunContext) -> List[CheckRecord]:
    cfg = ctx.config
    half = cfg.t_final / 2.0
    residual, drift = check_cocycle(ctx.J, ctx.poly, ctx.zs, half, half, cfg.dt, cfg.site)
    generator = max(check_generator(ctx.J, ctx.poly, z, half, cfg.dt, cfg.site) for z in ctx.zs)
    params = dict(_poly_params(ctx.poly), s=half, t=half, dt=cfg.dt)
    return [
        CheckRecord.evaluate("cocycle", dict(params, measure="composition"), residual, ctx.tol["single"]),
        CheckRecord.evaluate("cocycle", dict(params, measure="det_drift"), drift, ctx.tol["det"]),
        CheckRecord.evaluate("cocycle", dict(params, measure="generator"), generator, ctx.tol["single"]),
    ]


def run_shiftcomm(ctx: RunContext) -> List[CheckRecord]:
    cfg = ctx.config
    residual = check_shift_commutation(ctx.J, ctx.poly, ctx.zs, cfg.t_final, cfg.dt, cfg.site)
    params = dict(_poly_params(ctx.poly), t=cfg.t_final, dt=cfg.dt)
    return [CheckRecord.evaluate("shiftcomm", params, residual, ctx.tol["double"])]


def run_equivalence(ctx: RunContext) -> List[CheckRecord]:
    cfg = ctx.config
    lax_poly = cfg.lax_polynomial()
    report = check_flow_equivalence(
        ctx.J, ctx.poly, cfg.t_final, cfg.dt, ctx.zs,
        lax_poly=lax_poly, site=cfg.site, fd_step=cfg.fd_step, tolerance=ctx.tol["double"],
    )
    params = dict(_poly_params(ctx.poly), lax_p=lax_poly.to_list(), t=cfg.t_final, dt=cfg.dt)
    return [CheckRecord.evaluate("equivalence", params, report.max_residual, ctx.tol["double"])]


def run_spectrum(ctx: RunContext) -> List[CheckRecord]:
    cfg = ctx.config
    samples, _ = spectral_drift(ctx.J, ctx.poly, cfg.t_final, cfg.dt, every=1)
    eig = max(sample.eig_drift for sample in samples)
    traces = max(max(sample.trace1_drift, sample.trace2_drift) for sample in samples)
    params = dict(_poly_params(ctx.poly), t=cfg.t_final, dt=cfg.dt)
    return [
        CheckRecord.evaluate("spectrum", dict(params, measure="eigenvalue_drift"), eig, ctx.tol["spectrum"]),
        CheckRecord.evaluate("spectrum", dict(params, measure="trace_drift"), traces, ctx.tol["exact"]),
        CheckRecord.evaluate("spectrum", dict(params, measure="solver_residual"), spectrum(ctx.J).residual,
                             ctx.tol["spectrum"]),
    ]


def run_mfunc(ctx: RunContext) -> List[CheckRecord]:
    cfg = ctx.config
    site = cfg.mfunc.get("site")
    site = ctx.J.sites // 2 if site is None else int(site)
    records = []
    for z in ctx.zs:
        report = check_m_evolution(ctx.J, ctx.poly, cfg.t_final, z, cfg.dt, site)
        params = dict(
            _poly_params(ctx.poly), z=z, site=site, t=cfg.t_final,
            herglotz=report.herglotz, tail_deviation=report.tail_deviation,
        )
        records.append(CheckRecord.evaluate("mfunc", params, report.max, ctx.tol["mfunc"], report.herglotz))
    return records


CHECK_RUNNERS: Dict[str, CheckRunner] = {
    "master": run_master,
    "curvature": run_curvature,
    "cocycle": run_cocycle,
    "shiftcomm": run_shiftcomm,
    "pq": run_pq,
    "vanishing": run_vanishing,
    "mfunc": run_mfunc,
    "equivalence": run_equivalence,
    "spectrum": run_spectrum,
}


def run_checks(cfg: RunConfig, names: Optional[Sequence[str]] = None) -> List[CheckRecord]:
    names = list(cfg.checks if names is None else names)
    missing = [name for name in names if name not in CHECK_RUNNERS]
    if missing:
        raise ConfigError(f"unknown checks {missing}; choose from {list(CHECK_NAMES)}", field="checks")
    ctx = RunContext.from_config(cfg)
    runners = [CHECK_RUNNERS[name] for name in names]
    if cfg.workers > 1 and len(runners) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            batches = list(pool.map(lambda runner: runner(ctx), runners))
    else:
        batches = [runner(ctx) for runner in runners]
    records = [record for batch in batches for record in batch]
    logger.info("ran %d checks, %d records", len(names), len(records))
    return sorted(records, key=lambda record: record.sort_key)
