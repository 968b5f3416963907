"""Built-in property checks behind `explore verify`.

Each check returns (name, passed, detail). The heavier scenario-level
acceptance lives in the pytest suite; these are the fast invariants a
deployment can re-run anywhere.
"""
from __future__ import annotations

import itertools

import numpy as np

from .embedding import RunningMax, SyntheticEmbedder, SyntheticEmbedderConfig
from .memory import fuse_embedding
from .mission import compute_metrics, run_mission
from .planner import (CostMatrix, PlannerMode, PlannerParams, solve_atsp,
                      sop_semantic_factor, tour_cost, tsp_semantic_factor)
from .report import report_rows
from .scenegen import tiny_room_scenario

SOP_UPPER = 1.0 + 4.0 / 4.5
TSP_UPPER = 6.0


def check_factor_bounds() -> tuple[str, bool, str]:
    s = np.linspace(-1.0, 1.0, 200)
    c = np.linspace(0.0, 1.0, 200)
    vals = [sop_semantic_factor(si, ci) for si in s for ci in c]
    ok = all(0.2 - 1e-12 <= v <= SOP_UPPER + 1e-12 for v in vals)
    ok &= abs(sop_semantic_factor(1.0, 1.0) - 0.2) < 1e-9
    ok &= abs(sop_semantic_factor(-1.0, 0.0) - SOP_UPPER) < 1e-9
    sr = np.linspace(-1.0, 1.0, 10000)
    tv = [tsp_semantic_factor(x) for x in sr]
    ok &= all(0.2 - 1e-12 <= v <= TSP_UPPER + 1e-12 for v in tv)
    ok &= abs(tsp_semantic_factor(1.0) - 0.2) < 1e-9
    ok &= abs(tsp_semantic_factor(-1.0) - 6.0) < 1e-9
    return ("factor bounds", bool(ok),
            f"sop in [0.2, {SOP_UPPER:.4f}], tsp in [0.2, 6]")


def check_fixed_points() -> tuple[str, bool, str]:
    ok = tsp_semantic_factor(0.5) == 1.0
    left = tsp_semantic_factor(0.5 - 1e-12)
    right = tsp_semantic_factor(0.5 + 1e-12)
    ok &= abs(left - 1.0) < 1e-9 and abs(right - 1.0) < 1e-9
    ok &= sop_semantic_factor(0.0, 0.0) == 1.0
    return ("factor fixed points", bool(ok), "m_tsp(0.5)=1, m_sop(0,0)=1")


def check_fusion_norms() -> tuple[str, bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        e = rng.standard_normal(32)
        e /= np.linalg.norm(e)
        for _ in range(100):
            p = rng.standard_normal(32)
            p /= np.linalg.norm(p)
            e = fuse_embedding(e, p, float(rng.uniform(0.05, 0.95)))
        worst = max(worst, abs(float(np.linalg.norm(e)) - 1.0))
    return ("fusion norm preservation", worst < 1e-6, f"max deviation {worst:.2e}")


def check_atsp_quality() -> tuple[str, bool, str]:
    rng = np.random.default_rng(5)
    total = 0
    within = 0
    for n in range(4, 8):
        for _ in range(20):
            costs = rng.uniform(1.0, 10.0, size=(n, n))
            np.fill_diagonal(costs, 0.0)
            tour = solve_atsp(CostMatrix(costs))
            got = tour_cost(costs, tour)
            best = min(
                tour_cost(costs, [0] + list(p))
                for p in itertools.permutations(range(1, n))
            )
            total += 1
            if got <= 1.05 * best + 1e-9:
                within += 1
            if sorted(tour) != list(range(n)):
                return ("atsp tour quality", False, "invalid permutation")
    ok = within >= 0.95 * total
    return ("atsp tour quality", ok, f"{within}/{total} within 5% of optimum")


def check_mission_invariants() -> tuple[str, bool, str]:
    scn = tiny_room_scenario()
    log = run_mission(scn, PlannerMode.SAGE, seed=0, max_time=60.0)
    ok = log.cache_clean_after_cycles and log.confidences_in_range
    detail = f"completed={log.completed}, cache clean={log.cache_clean_after_cycles}"
    return ("cache lifecycle and confidence range", bool(ok), detail)


def check_memory_compactness() -> tuple[str, bool, str]:
    scn = tiny_room_scenario()
    log = run_mission(scn, PlannerMode.SAGE, seed=0, max_time=60.0)
    dense = log.occupied_voxels * 512
    stored = log.stored_embedding_floats
    ok = log.occupied_voxels > 0 and stored <= 0.01 * dense
    return ("object-level memory compactness", bool(ok),
            f"{stored} floats vs {dense} dense ({100.0 * stored / max(dense, 1):.2f}%)")


def check_determinism() -> tuple[str, bool, str]:
    scn = tiny_room_scenario()
    rows = []
    for _ in range(2):
        log = run_mission(scn, PlannerMode.SAGE, seed=1, max_time=30.0)
        rows.append(report_rows([compute_metrics(log, scn.scene)]))
    ok = rows[0] == rows[1]
    return ("mission determinism", ok, "byte-identical report rows")


ALL_CHECKS = [
    check_factor_bounds,
    check_fixed_points,
    check_fusion_norms,
    check_atsp_quality,
    check_mission_invariants,
    check_memory_compactness,
    check_determinism,
]


def run_all(verbose: bool = True) -> bool:
    all_ok = True
    for fn in ALL_CHECKS:
        name, ok, detail = fn()
        all_ok &= ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
