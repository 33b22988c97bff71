"""Numeric verification of the turnpike premises and conclusion.

The six conditions checked here:

* A1 -- the correspondence is continuous with compact (finitely sampled)
  images: probed through Hausdorff sensitivity at shrinking scales.
* A2 -- the utility map is continuous: sampled difference quotients.
* A3 -- the ideal is translation invariant: shifted small sets stay small.
* A4 -- a unique utility-maximizing stationary point exists: fixed-point
  scan plus a uniqueness margin on the runner-up.
* A5 -- a linear functional strictly separates one dynamics step on the
  upper level set F = {x : u(x) >= u(eta_star)}: sampled (x, y) pairs,
  with every would-be witness re-verified at 10x image resolution.
* A6 -- the optimum value is attainable: witnessed by a supplied
  reference path whose utility liminf reaches u(eta_star).

Failed conditions always carry a concrete witness; missing inputs make a
condition untestable, never passing.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from turnlab.analysis import cluster_points, deviation_densities, ideal_liminf
from turnlab.dynamics import (
    Correspondence,
    Interval1D,
    Path,
    SystemInstance,
    TruncatedL2,
    continuity_probe,
    feasibility_check,
    fixed_points,
)
from turnlab.ideals import IdealModel, check_translation_invariance
from turnlab.windows import SequenceWindow

UNIQUENESS_MARGIN = 1e-6
A6_TOL = 1e-6


@dataclass(frozen=True)
class SamplingPlan:
    """Reproducible probe configuration for the condition checks."""

    n_points: int = 10_000
    seed: int = 0
    continuity_samples: int = 256
    translation_samples: int = 200
    translation_shifts: tuple[int, ...] = (1, -1, 7, -7)
    delta_ladder: Optional[tuple[float, ...]] = None

    def describe(self) -> dict:
        return {
            "n_points": self.n_points,
            "seed": self.seed,
            "continuity_samples": self.continuity_samples,
            "translation_samples": self.translation_samples,
            "translation_shifts": list(self.translation_shifts),
            "delta_ladder": list(self.delta_ladder) if self.delta_ladder else None,
        }


# ---------------------------------------------------------------------------
# separation functional helpers


def t_hat(sys: SystemInstance, x) -> float:
    """Best one-step separation gain max over y in Phi(x) of T(y - x)."""
    if sys.separation is None:
        raise ValueError("system has no separation functional configured")
    p = np.asarray(x, dtype=float).ravel()
    imgs = sys.phi.images(p)
    return float((imgs @ sys.separation).max() - p @ sys.separation)


def t_hat_batch(sys: SystemInstance, pts: np.ndarray) -> np.ndarray:
    """Vectorized t_hat over a (P, d) batch."""
    if sys.separation is None:
        raise ValueError("system has no separation functional configured")
    pts = np.asarray(pts, dtype=float)
    children, parent, _ = sys.phi.expand(pts)
    ty = children @ sys.separation
    bounds = np.searchsorted(parent, np.arange(pts.shape[0]))
    best = np.maximum.reduceat(ty, bounds)
    return best - pts @ sys.separation


def _refined_images(phi: Correspondence, x: np.ndarray) -> np.ndarray:
    """Image sample at roughly 10x resolution, for witness re-verification."""
    if isinstance(phi, Interval1D):
        finer = dataclasses.replace(phi, samples=10 * phi.samples - 9)
        return finer.images(x)
    if isinstance(phi, TruncatedL2):
        finer = dataclasses.replace(phi, band_samples=min(5, phi.band_samples + 3))
        return finer.images(x)
    return phi.images(x)  # finite branches are already exact


# ---------------------------------------------------------------------------
# condition checks


@dataclass(frozen=True)
class ConditionReport:
    conditions: dict
    plan: dict
    model: dict

    @property
    def all_pass(self) -> bool:
        return all(c["verdict"] == "pass" for c in self.conditions.values())

    def verdict(self, name: str) -> str:
        return self.conditions[name]["verdict"]

    def to_dict(self) -> dict:
        return {"conditions": self.conditions, "plan": self.plan, "model": self.model}


def _sample_box(box: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = box[:, 0], box[:, 1]
    return lo + rng.random((k, box.shape[0])) * (hi - lo)


def _scalar_continuity(u, box: np.ndarray, samples: int, ladder, seed: int) -> dict:
    span = float((box[:, 1] - box[:, 0]).max())
    if ladder is None:
        ladder = tuple(span / k for k in (20, 40, 80, 160))
    rng = np.random.default_rng(seed)
    pts = _sample_box(box, samples, rng)
    rungs = []
    for delta in ladder:
        dirs = rng.normal(size=pts.shape)
        dirs /= np.sqrt((dirs**2).sum(axis=1))[:, None]
        moved = pts + delta * dirs
        du = np.abs(
            np.asarray(u(moved), dtype=float).ravel() - np.asarray(u(pts), dtype=float).ravel()
        )
        rungs.append({"delta": float(delta), "max_ratio": float(du.max() / delta)})
    first, last = rungs[0]["max_ratio"], rungs[-1]["max_ratio"]
    if last <= 1e-12:
        growth, passed = 0.0, True
    else:
        growth = last / max(first, 1e-12)
        passed = growth <= float(np.sqrt(ladder[0] / ladder[-1]))
    return {"rungs": rungs, "growth": growth, "passed": passed}


def _check_a4(sys: SystemInstance) -> dict:
    pts = fixed_points(sys.phi, sys.box, seed=17)
    if pts.shape[0] == 0:
        return {"verdict": "fail", "reason": "no stationary point found in the box"}
    utils = sys.utilities(pts).reshape(-1)
    order = np.argsort(-utils, kind="stable")
    best = pts[order[0]]
    diag = {
        "fixed_points": [[float(v) for v in p] for p in pts],
        "utilities": [float(v) for v in utils],
        "maximizer": [float(v) for v in best],
    }
    if pts.shape[0] > 1:
        margin = float(utils[order[0]] - utils[order[1]])
        diag["margin"] = margin
        if margin <= UNIQUENESS_MARGIN:
            diag["witnesses"] = [
                [float(v) for v in pts[order[0]]],
                [float(v) for v in pts[order[1]]],
            ]
            return {"verdict": "fail", "reason": "maximizer not unique", **diag}
    if sys.eta_star is not None:
        gap = float(np.sqrt(((best - sys.eta_star) ** 2).sum()))
        diag["eta_star_gap"] = gap
        if gap > 1e-4 * (1.0 + float(np.abs(sys.eta_star).max())):
            return {
                "verdict": "fail",
                "reason": "maximizing stationary point disagrees with the declared one",
                **diag,
            }
    return {"verdict": "pass", **diag}


def _separation_pairs(sys: SystemInstance, plan: SamplingPlan, include_stationary: bool):
    """Sampled (x, y in Phi(x)) pairs with x drawn from F.

    The stationary point itself is prepended only on request: the A5
    condition is a randomized audit of the probe box, while the
    strong/weak variant comparison must evaluate the implication at
    eta_star exactly, since that is where the two variants part ways.
    """
    rng = np.random.default_rng(plan.seed)
    u_star = float(sys.utilities(sys.eta_star[None, :])[0])
    collected = []
    attempts = 0
    while sum(c.shape[0] for c in collected) < plan.n_points and attempts < 40:
        draw = _sample_box(sys.box, plan.n_points, rng)
        keep = draw[np.asarray(sys.utilities(draw), dtype=float).ravel() >= u_star]
        if keep.shape[0]:
            collected.append(keep)
        attempts += 1
    if collected:
        pts = np.concatenate(collected, axis=0)[: plan.n_points]
    else:
        pts = np.empty((0, sys.dim))
    if include_stationary:
        pts = np.concatenate([sys.eta_star[None, :], pts], axis=0)
    children, parent, _ = sys.phi.expand(pts)
    return pts, children, parent


def _confirm_separation_witness(sys: SystemInstance, x: np.ndarray, y: np.ndarray) -> bool:
    """Re-verify T x <= T y against a 10x-resolution image sample."""
    refined = _refined_images(sys.phi, x)
    gaps = np.sqrt(((refined - y) ** 2).sum(axis=1))
    j = int(np.argmin(gaps))
    scale = 1.0 + float(np.abs(x).max()) + float(np.abs(y).max())
    if gaps[j] > 1e-6 * scale:
        return False
    tx = float(x @ sys.separation)
    ty = float(refined[j] @ sys.separation)
    return tx <= ty + 1e-15 * scale


def check_conditions(sys: SystemInstance, plan: SamplingPlan | None = None) -> ConditionReport:
    """Run the full A1-A6 battery against a system instance."""
    plan = plan or SamplingPlan()
    out: dict[str, dict] = {}

    probe = continuity_probe(
        sys.phi, sys.box, samples=plan.continuity_samples, ladder=plan.delta_ladder, seed=plan.seed
    )
    out["A1"] = {"verdict": "pass" if probe.passed else "fail", **probe.to_dict()}

    a2 = _scalar_continuity(
        sys.utility, sys.box, plan.continuity_samples, plan.delta_ladder, plan.seed
    )
    out["A2"] = {"verdict": "pass" if a2["passed"] else "fail", **a2}

    inv = check_translation_invariance(
        sys.ideal,
        samples=plan.translation_samples,
        shifts=plan.translation_shifts,
        seed=plan.seed,
    )
    out["A3"] = {"verdict": "pass" if inv.invariant else "fail", **inv.to_dict()}

    out["A4"] = _check_a4(sys)

    if sys.separation is None or sys.eta_star is None:
        out["A5"] = {
            "verdict": "untestable",
            "reason": "no separation functional or stationary point configured",
        }
    else:
        pts, children, parent = _separation_pairs(sys, plan, include_stationary=False)
        tx = pts @ sys.separation
        ty = children @ sys.separation
        scale = 1.0 + float(np.abs(pts).max())
        premise = tx[parent] <= ty
        x_is_star = np.sqrt(((pts - sys.eta_star) ** 2).sum(axis=1)) <= 1e-9 * scale
        y_is_star = np.sqrt(((children - sys.eta_star) ** 2).sum(axis=1)) <= 1e-9 * scale
        violating = premise & ~(x_is_star[parent] & y_is_star)
        verdict, witness = "pass", None
        for i in np.nonzero(violating)[0]:
            x, y = pts[parent[i]], children[i]
            if _confirm_separation_witness(sys, x, y):
                verdict = "fail"
                witness = {"x": [float(v) for v in x], "y": [float(v) for v in y]}
                break
        out["A5"] = {
            "verdict": verdict,
            "pairs_checked": int(children.shape[0]),
            "witness": witness,
        }

    if sys.reference_path is None or sys.eta_star is None:
        out["A6"] = {"verdict": "untestable", "reason": "no reference path supplied"}
    else:
        ref = sys.reference_path
        feas = feasibility_check(ref, sys.phi)
        u_star = float(sys.utilities(sys.eta_star[None, :])[0])
        ref_values = SequenceWindow(ref.utilities(sys.utility))
        model_ref = sys.ideal.at_horizon(ref_values.horizon)
        liminf = ideal_liminf(ref_values, model_ref)
        ok = feas["feasible"] and liminf >= u_star - A6_TOL * (1.0 + abs(u_star))
        out["A6"] = {
            "verdict": "pass" if ok else "fail",
            "reference_liminf": liminf,
            "u_eta_star": u_star,
            "reference_feasible": feas["feasible"],
        }

    return ConditionReport(conditions=out, plan=plan.describe(), model=sys.ideal.describe())


# ---------------------------------------------------------------------------
# strong vs. weak separation variants


@dataclass(frozen=True)
class SeparationVariantReport:
    strong_holds: bool
    weak_holds: bool
    weak_without_strong: bool
    strong_witness: Optional[dict]
    weak_witness: Optional[dict]
    pairs_checked: int

    def to_dict(self) -> dict:
        return {
            "strong_holds": self.strong_holds,
            "weak_holds": self.weak_holds,
            "weak_without_strong": self.weak_without_strong,
            "strong_witness": self.strong_witness,
            "weak_witness": self.weak_witness,
            "pairs_checked": self.pairs_checked,
        }


def check_separation_variants(
    sys: SystemInstance, plan: SamplingPlan | None = None
) -> SeparationVariantReport:
    """Probe both separation implications over sampled pairs.

    Strong: T x <= T y forces x = y = eta_star. Weak: it only forces
    x = eta_star. The report flags systems where the weak variant holds
    but the strong one fails.
    """
    if sys.separation is None or sys.eta_star is None:
        raise ValueError("separation variants need the functional and eta_star")
    plan = plan or SamplingPlan()
    pts, children, parent = _separation_pairs(sys, plan, include_stationary=True)
    tx = pts @ sys.separation
    ty = children @ sys.separation
    scale = 1.0 + float(np.abs(pts).max())
    premise = tx[parent] <= ty
    x_is_star = np.sqrt(((pts - sys.eta_star) ** 2).sum(axis=1)) <= 1e-9 * scale
    y_is_star = np.sqrt(((children - sys.eta_star) ** 2).sum(axis=1)) <= 1e-9 * scale
    strong_viol = premise & ~(x_is_star[parent] & y_is_star)
    weak_viol = premise & ~x_is_star[parent]
    strong_witness = weak_witness = None
    for i in np.nonzero(strong_viol)[0]:
        x, y = pts[parent[i]], children[i]
        if _confirm_separation_witness(sys, x, y):
            strong_witness = {"x": [float(v) for v in x], "y": [float(v) for v in y]}
            break
    for i in np.nonzero(weak_viol)[0]:
        x, y = pts[parent[i]], children[i]
        if _confirm_separation_witness(sys, x, y):
            weak_witness = {"x": [float(v) for v in x], "y": [float(v) for v in y]}
            break
    strong_holds = strong_witness is None
    weak_holds = weak_witness is None
    return SeparationVariantReport(
        strong_holds=strong_holds,
        weak_holds=weak_holds,
        weak_without_strong=weak_holds and not strong_holds,
        strong_witness=strong_witness,
        weak_witness=weak_witness,
        pairs_checked=int(children.shape[0]),
    )


# ---------------------------------------------------------------------------
# turnpike verdict


@dataclass(frozen=True)
class TurnpikeVerdict:
    eta_star: np.ndarray
    rungs: tuple[dict, ...]
    verdict: bool
    model: dict

    def to_dict(self) -> dict:
        return {
            "eta_star": [float(v) for v in np.atleast_1d(self.eta_star)],
            "rungs": list(self.rungs),
            "verdict": self.verdict,
            "model": self.model,
        }


def turnpike_verdict(
    path: Path, eta_star, model: IdealModel, ladder: Sequence[float]
) -> TurnpikeVerdict:
    """Does the path spend all but a small index set near eta_star?

    Each rung reports the raw upper density of {n : ||x_n - eta_star||
    >= eps}; the verdict holds when every rung's deviation set is small.
    """
    if path.window.horizon < 1:
        raise ValueError("empty path")
    if not ladder:
        raise ValueError("ladder must hold at least one scale")
    model = model.at_horizon(path.window.horizon)
    rungs = deviation_densities(
        path.window, np.asarray(eta_star, dtype=float), model, tuple(ladder), apply_burn_in=False
    )
    return TurnpikeVerdict(
        eta_star=np.asarray(eta_star, dtype=float),
        rungs=tuple(rungs),
        verdict=all(r["small"] for r in rungs),
        model=model.describe(),
    )


def path_separation_diagnostic(
    sys: SystemInstance, path: Path, eps_grid: float | None = None
) -> dict:
    """Path-local separation check on the realized cluster set.

    Evaluates the one-step implication only at the path's own cluster
    points: for x there and y in Phi(x), T x <= T y must force
    x = y = eta_star. Diagnostic output; it cannot upgrade a system-wide
    verdict because it depends on the path that was found.
    """
    if sys.separation is None or sys.eta_star is None:
        raise ValueError("diagnostic needs the separation functional and eta_star")
    clusters = cluster_points(path.window, sys.ideal, eps_grid=eps_grid)
    scale = 1.0 + float(np.abs(path.points).max())
    witnesses = []
    for x in clusters:
        tx = float(x @ sys.separation)
        for y in sys.phi.images(x):
            ty = float(y @ sys.separation)
            if tx <= ty:
                x_star = np.sqrt(((x - sys.eta_star) ** 2).sum()) <= 1e-6 * scale
                y_star = np.sqrt(((y - sys.eta_star) ** 2).sum()) <= 1e-6 * scale
                if not (x_star and y_star):
                    witnesses.append(
                        {"x": [float(v) for v in x], "y": [float(v) for v in y]}
                    )
    return {
        "holds_on_path_clusters": not witnesses,
        "cluster_count": int(clusters.shape[0]),
        "witnesses": witnesses[:8],
    }
