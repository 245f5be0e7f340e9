"""Scoring inferred alias links against ground truth.

Evaluation is restricted to labeled pairs: the label set is a sample, not
a census, so predictions on unlabeled pairs are unknowable rather than
wrong. Precision/recall/F1 use exact rational arithmetic on the counts.
Also here: threshold calibration, district cross-validation, cross-city
transfer, the grid-resolution sweep, and the text edit-distance baseline.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .discovery import AliasMatrix, MetricConfig, ScoredPair
from .errors import InvalidConfigError, NoPositiveLabelsError, TooFewDistrictsError
from .ingestion import GroundTruthLabel
from .pipeline import CityData, score_city
from .preprocess import normalized_edit_distance

DistrictScores = dict[str, list[ScoredPair]]


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    true_positive: int
    predicted_positive: int
    actual_positive: int
    flags: list = field(default_factory=list)
    n_insufficient: int = 0
    method: str = ""
    threshold: float | None = None
    per_district: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "true_positive": self.true_positive,
            "predicted_positive": self.predicted_positive,
            "actual_positive": self.actual_positive,
            "flags": list(self.flags),
            "n_insufficient": self.n_insufficient,
            "method": self.method,
            "threshold": json_safe(self.threshold),
            "per_district": self.per_district,
        }
        if self.config:
            out["config"] = self.config
        return out


def json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def prf_from_counts(tp: int, predicted: int, actual: int):
    """Exact precision/recall/F1 from confusion counts.

    Zero-denominator cases yield 0.0 and a flag instead of an error.
    """
    flags = []
    if predicted > 0:
        precision = Fraction(tp, predicted)
    else:
        precision = Fraction(0)
        flags.append("no-predictions")
    if actual > 0:
        recall = Fraction(tp, actual)
    else:
        recall = Fraction(0)
        flags.append("no-actual-positives")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = Fraction(0)
    return float(precision), float(recall), float(f1), flags


def _labels_to_map(truth, district: str | None = None) -> dict:
    """Accept either a {(std, cand): bool} map or GroundTruthLabel records."""
    if isinstance(truth, dict):
        return truth
    out = {}
    for lb in truth:
        if isinstance(lb, GroundTruthLabel):
            if district and lb.district != district:
                continue
            out[(lb.standard_name, lb.candidate_name)] = lb.is_alias
        else:
            raise TypeError(f"cannot interpret truth entry {lb!r}")
    return out


def confusion_counts(predicted_links: set, labels: dict):
    """(tp, predicted-on-labeled, actual-positive) for one district."""
    tp = 0
    predicted = 0
    for pair in predicted_links:
        if pair in labels:
            predicted += 1
            if labels[pair]:
                tp += 1
    actual = sum(1 for v in labels.values() if v)
    return tp, predicted, actual


def precision_recall_f1(inferred: AliasMatrix, truth) -> EvalReport:
    """Evaluate one inferred alias matrix against ground truth.

    Predicted links on unlabeled pairs are excluded from both numerator
    and denominator; actual positives count every positive label.
    """
    labels = _labels_to_map(truth, inferred.district or None)
    tp, predicted, actual = confusion_counts(inferred.link_names(), labels)
    p, r, f1, flags = prf_from_counts(tp, predicted, actual)
    return EvalReport(
        precision=p,
        recall=r,
        f1=f1,
        true_positive=tp,
        predicted_positive=predicted,
        actual_positive=actual,
        flags=flags,
    )


def _labeled_scores(scored: list[ScoredPair], labels: dict):
    """(score, is_positive) for labeled pairs; insufficient pairs excluded."""
    out = []
    for pair in scored:
        key = (pair.standard_name, pair.candidate_name)
        if key in labels and pair.score is not None:
            out.append((pair.score, labels[key]))
    return out


def _counts_at_threshold(scored: list[ScoredPair], labels: dict, theta: float):
    tp = 0
    predicted = 0
    insufficient = 0
    for pair in scored:
        key = (pair.standard_name, pair.candidate_name)
        if key not in labels:
            continue
        if pair.score is None:
            insufficient += 1
            continue
        if pair.score > theta:
            predicted += 1
            if labels[key]:
                tp += 1
    actual = sum(1 for v in labels.values() if v)
    return tp, predicted, actual, insufficient


@dataclass
class Calibration:
    theta: float
    f1: float
    precision: float
    recall: float
    n_candidates: int


def calibrate_threshold(scored: list[ScoredPair], truth) -> Calibration:
    """Pick the threshold maximizing F1 over the labeled scored pairs.

    Candidate thresholds are the midpoints between consecutive distinct
    scores plus -inf/+inf sentinels; F1 is piecewise constant between
    distinct scores, so this sweep is exhaustive. Ties break toward the
    largest threshold (fewest links).
    """
    labels = _labels_to_map(truth)
    pairs = _labeled_scores(scored, labels)
    actual = sum(1 for v in labels.values() if v)
    if not any(pos for _, pos in pairs):
        raise NoPositiveLabelsError("no positive labels among the scored pairs")

    pairs.sort(key=lambda sp: sp[0])
    scores = [s for s, _ in pairs]
    positives = [1 if pos else 0 for _, pos in pairs]
    n = len(pairs)

    distinct = sorted(set(scores))
    candidates = [float("-inf")]
    candidates += [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    candidates += [float("inf")]

    # suffix sums over the ascending score order
    suffix_tp = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_tp[i] = suffix_tp[i + 1] + positives[i]

    best = None
    for theta in candidates:
        cut = bisect.bisect_right(scores, theta) if math.isfinite(theta) else (0 if theta < 0 else n)
        predicted = n - cut
        tp = suffix_tp[cut]
        if predicted > 0 and actual > 0:
            p = Fraction(tp, predicted)
            r = Fraction(tp, actual)
            f1 = 2 * p * r / (p + r) if p + r > 0 else Fraction(0)
        else:
            p = r = f1 = Fraction(0)
        # >= implements the tie rule: later candidates are larger thresholds
        if best is None or f1 >= best[0]:
            best = (f1, theta, p, r)
    f1, theta, p, r = best
    return Calibration(
        theta=theta,
        f1=float(f1),
        precision=float(p),
        recall=float(r),
        n_candidates=len(candidates),
    )


def evaluate_districts(
    city: CityData,
    scores: DistrictScores,
    theta: float,
    districts: list[str] | None = None,
    method: str = "",
    config: dict | None = None,
) -> EvalReport:
    """Pooled + per-district evaluation of scored pairs at one threshold."""
    if districts is None:
        districts = sorted(d for d in scores if city.districts[d].labels)
    tot_tp = tot_pred = tot_act = tot_ins = 0
    per_district = {}
    for d in districts:
        dd = city.districts[d]
        tp, pred, act, ins = _counts_at_threshold(scores.get(d, []), dd.labels, theta)
        p, r, f1, flags = prf_from_counts(tp, pred, act)
        per_district[d] = {
            "precision": p,
            "recall": r,
            "f1": f1,
            "true_positive": tp,
            "predicted_positive": pred,
            "actual_positive": act,
            "n_insufficient": ins,
            "flags": flags,
        }
        tot_tp += tp
        tot_pred += pred
        tot_act += act
        tot_ins += ins
    p, r, f1, flags = prf_from_counts(tot_tp, tot_pred, tot_act)
    return EvalReport(
        precision=p,
        recall=r,
        f1=f1,
        true_positive=tot_tp,
        predicted_positive=tot_pred,
        actual_positive=tot_act,
        flags=flags,
        n_insufficient=tot_ins,
        method=method,
        threshold=theta,
        per_district=per_district,
        config=config or {},
    )


def _pool_pairs_labels(city: CityData, scores: DistrictScores, districts: list[str]):
    pooled_pairs: list[ScoredPair] = []
    pooled_labels: dict = {}
    for d in districts:
        dd = city.districts[d]
        # district-qualified keys keep same-name pairs from colliding
        for pair in scores.get(d, []):
            pooled_pairs.append(
                ScoredPair(
                    standard_name=f"{d}\x00{pair.standard_name}",
                    candidate_name=pair.candidate_name,
                    score=pair.score,
                    decision=pair.decision,
                )
            )
        for (s, c), v in dd.labels.items():
            pooled_labels[(f"{d}\x00{s}", c)] = v
    return pooled_pairs, pooled_labels


def calibrate_on_districts(
    city: CityData, scores: DistrictScores, districts: list[str]
) -> Calibration:
    pairs, labels = _pool_pairs_labels(city, scores, districts)
    return calibrate_threshold(pairs, labels)


@dataclass
class CrossValReport:
    folds: list
    mean_f1: float
    mean_precision: float
    mean_recall: float
    pooled: EvalReport

    def to_dict(self) -> dict:
        return {
            "folds": self.folds,
            "mean_f1": self.mean_f1,
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "pooled": self.pooled.to_dict(),
        }


def district_cross_validation(
    city: CityData,
    scores: DistrictScores,
    train_frac: float = 0.8,
    method: str = "",
) -> CrossValReport:
    """Calibrate on training districts, evaluate on held-out ones.

    Districts are sorted by name and assigned to folds round-robin, so the
    split is deterministic. With k labeled districts the training side
    holds min(ceil(train_frac * k), k - 1) districts; each district is
    tested exactly once across the folds. Reports both the per-fold mean
    and the pooled-count aggregate.
    """
    labeled = [d for d in city.labeled_districts() if d in scores]
    k = len(labeled)
    if k < 2:
        raise TooFewDistrictsError(f"cross-validation needs >= 2 labeled districts, got {k}")
    train_size = min(math.ceil(train_frac * k), k - 1)
    test_size = k - train_size
    n_folds = math.ceil(k / test_size)

    assignments: dict[int, list[str]] = {f: [] for f in range(n_folds)}
    for i, d in enumerate(labeled):
        assignments[i % n_folds].append(d)

    folds = []
    tot_tp = tot_pred = tot_act = 0
    f1s, ps, rs = [], [], []
    for f in range(n_folds):
        test = assignments[f]
        train = [d for d in labeled if d not in test]
        cal = calibrate_on_districts(city, scores, train)
        rep = evaluate_districts(city, scores, cal.theta, districts=test, method=method)
        folds.append(
            {
                "fold": f,
                "train_districts": train,
                "test_districts": test,
                "theta": json_safe(cal.theta),
                "train_f1": cal.f1,
                "test": rep.to_dict(),
            }
        )
        f1s.append(rep.f1)
        ps.append(rep.precision)
        rs.append(rep.recall)
        tot_tp += rep.true_positive
        tot_pred += rep.predicted_positive
        tot_act += rep.actual_positive
    p, r, f1, flags = prf_from_counts(tot_tp, tot_pred, tot_act)
    pooled = EvalReport(
        precision=p,
        recall=r,
        f1=f1,
        true_positive=tot_tp,
        predicted_positive=tot_pred,
        actual_positive=tot_act,
        flags=flags,
        method=method,
    )
    return CrossValReport(
        folds=folds,
        mean_f1=sum(f1s) / len(f1s),
        mean_precision=sum(ps) / len(ps),
        mean_recall=sum(rs) / len(rs),
        pooled=pooled,
    )


@dataclass
class TransferReport:
    theta: float
    source_report: EvalReport
    target_report: EvalReport

    def to_dict(self) -> dict:
        return {
            "theta": json_safe(self.theta),
            "source": self.source_report.to_dict(),
            "target": self.target_report.to_dict(),
        }


def cross_city_transfer(
    source_city: CityData,
    source_scores: DistrictScores,
    target_city: CityData,
    target_scores: DistrictScores,
    method: str = "",
) -> TransferReport:
    """Calibrate on all source labels, apply unchanged to the target city."""
    cal = calibrate_on_districts(source_city, source_scores, sorted(source_scores))
    src = evaluate_districts(source_city, source_scores, cal.theta, method=method)
    tgt = evaluate_districts(target_city, target_scores, cal.theta, method=method)
    return TransferReport(theta=cal.theta, source_report=src, target_report=tgt)


def resolution_sweep(
    city: CityData,
    method: str,
    grid_values: list[int],
    base_config: MetricConfig,
    workers: int = 1,
) -> list[tuple[int, EvalReport]]:
    """Calibrate-and-evaluate once per grid resolution.

    Each grid size gets a full scoring pass, in-city calibration over all
    labeled pairs, and an evaluation at the calibrated threshold.
    """
    if not grid_values:
        raise InvalidConfigError("grid_values must be non-empty")
    results = []
    for n in grid_values:
        cfg = replace(base_config, method=method, grid_n=int(n))
        scores = score_city(city, cfg, workers=workers)
        cal = calibrate_on_districts(city, scores, sorted(scores))
        rep = evaluate_districts(city, scores, cal.theta, method=method)
        rep.threshold = cal.theta
        results.append((int(n), rep))
    return results


def edit_distance_baseline(
    standards: list[str], candidates: list[str], threshold_edit: float, district: str = ""
) -> AliasMatrix:
    """Text-only baseline: link names whose normalized edit distance is
    strictly below the cutoff.

    Note the sign convention: the cutoff bounds a distance from above,
    unlike the similarity thresholds elsewhere which bound from below.
    """
    matrix = AliasMatrix(
        district=district,
        standard_names=list(standards),
        candidate_names=list(candidates),
    )
    for i, s in enumerate(standards):
        for j, c in enumerate(candidates):
            if normalized_edit_distance(s, c) < threshold_edit:
                matrix.links.add((i, j))
    return matrix
