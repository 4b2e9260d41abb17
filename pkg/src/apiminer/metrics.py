"""Group-accuracy metrics (PGA / RGA / FGA) and cluster purity."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field

from .refine import EndpointCluster

CSV_HEADER = "dataset,noise_type,noise_ratio,seed,tp,fp,fn,pga,rga,fga,purity"


class NoLabeledDataError(ValueError):
    """Raised when purity is requested but no labeled record is clustered."""


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    pga: float
    rga: float
    fga: float
    purity: float
    pga_defined: bool
    rga_defined: bool
    fga_defined: bool
    per_cluster: list[dict] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "pga": round(self.pga, 4),
            "rga": round(self.rga, 4),
            "fga": round(self.fga, 4),
            "purity": round(self.purity, 6),
            "pga_defined": self.pga_defined,
            "rga_defined": self.rga_defined,
            "fga_defined": self.fga_defined,
            "per_cluster": self.per_cluster,
            "config_echo": self.config_echo,
        }
        return json.dumps(payload, indent=2, sort_keys=False)

    def to_csv_row(self, dataset: str = "", noise_type: str = "", noise_ratio: float = 0.0,
                   seed: int = 0) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="")
        writer.writerow(
            [
                dataset,
                noise_type,
                f"{noise_ratio:g}",
                seed,
                self.tp,
                self.fp,
                self.fn,
                f"{self.pga:.2f}",
                f"{self.rga:.2f}",
                f"{self.fga:.2f}",
                f"{self.purity:.4f}",
            ]
        )
        return buf.getvalue()


def _label_sets(truth: dict[int, str]) -> dict[str, frozenset[int]]:
    sets: dict[str, set[int]] = {}
    for rid, label in truth.items():
        sets.setdefault(label, set()).add(rid)
    return {label: frozenset(ids) for label, ids in sets.items()}


def match_counts(
    clusters: list[EndpointCluster],
    truth: dict[int, str],
    lenient: bool = False,
) -> tuple[int, int, int]:
    """Exact-set group accuracy counts.

    A cluster is correct iff its labeled members are exactly the full record
    set of one endpoint label and it contains neither another label's records
    nor unlabeled (interference) records.  With ``lenient`` a cluster matches
    its majority label instead, each label claimed by at most one cluster.
    """
    label_sets = _label_sets(truth)
    matched: set[str] = set()
    tp = 0
    for cluster in clusters:
        labeled = frozenset(i for i in cluster.member_ids if i in truth)
        if lenient:
            if not labeled:
                continue
            majority, count = Counter(truth[i] for i in labeled).most_common(1)[0]
            if majority in matched:
                continue
            if count * 2 > len(label_sets[majority]) and count * 2 > len(labeled):
                matched.add(majority)
                tp += 1
            continue
        if not labeled or len(labeled) != len(cluster.member_ids):
            continue
        labels = {truth[i] for i in labeled}
        if len(labels) != 1:
            continue
        label = next(iter(labels))
        if labeled == label_sets[label] and label not in matched:
            matched.add(label)
            tp += 1
    fp = len(clusters) - tp
    fn = len(label_sets) - len(matched)
    return tp, fp, fn


def purity(clusters: list[EndpointCluster], truth: dict[int, str]) -> float:
    """(1/N) * sum_k max_c |cluster k members with label c|, labeled records only."""
    total = 0
    majority_sum = 0
    for cluster in clusters:
        labels = [truth[i] for i in cluster.member_ids if i in truth]
        total += len(labels)
        if labels:
            majority_sum += Counter(labels).most_common(1)[0][1]
    if total == 0:
        raise NoLabeledDataError("no labeled records in any cluster")
    return majority_sum / total


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den <= 0:
        return 0.0, False
    return 100.0 * num / den, True


def report(
    clusters: list[EndpointCluster],
    truth: dict[int, str],
    config_echo: dict | None = None,
    lenient: bool = False,
) -> EvalReport:
    tp, fp, fn = match_counts(clusters, truth, lenient=lenient)
    pga, pga_def = _ratio(tp, tp + fp)
    rga, rga_def = _ratio(tp, tp + fn)
    fga, fga_def = _ratio(2 * tp, 2 * tp + fp + fn)
    if not clusters and truth:
        # degenerate run: nothing discovered; flagged zero rather than an error
        pur = 0.0
    else:
        pur = purity(clusters, truth)

    label_sets = _label_sets(truth)
    per_cluster = []
    for idx, cluster in enumerate(clusters):
        labels = [truth[i] for i in cluster.member_ids if i in truth]
        majority, count = (None, 0)
        if labels:
            majority, count = Counter(labels).most_common(1)[0]
        labeled = frozenset(i for i in cluster.member_ids if i in truth)
        exact = (
            majority
            if majority is not None
            and len(labeled) == len(cluster.member_ids)
            and len(set(labels)) == 1
            and labeled == label_sets[majority]
            else None
        )
        per_cluster.append(
            {
                "cluster": idx,
                "template": cluster.template.render(),
                "method": cluster.method,
                "size": len(cluster.member_ids),
                "matched_endpoint": exact,
                "majority_label": majority,
                "majority_fraction": round(count / len(labels), 6) if labels else 0.0,
            }
        )
    return EvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        pga=pga,
        rga=rga,
        fga=fga,
        purity=pur,
        pga_defined=pga_def,
        rga_defined=rga_def,
        fga_defined=fga_def,
        per_cluster=per_cluster,
        config_echo=config_echo or {},
    )
