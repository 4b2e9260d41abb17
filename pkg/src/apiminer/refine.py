"""Stage-2 refinement: split template groups into behavioral endpoint clusters.

Large groups with a dense similarity graph are refined by training request
embeddings against the graph (adjacency-reconstruction loss plus a KL
self-training regularizer); sparse or small groups fall back to K-means.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .records import Dataset, HttpRecord
from .normalize import NormalizedRequest, normalize, canonical_path
from .denoise import FilterConfig, filter_traffic
from .templates import MinerConfig, PathTemplate, TemplateGroup, mine
from .features import (
    SimilarityGraph,
    build_graph,
    connected_components,
    extract_features,
    scale_features,
    select_k,
)

PASSTHROUGH = "Passthrough"
GRAPH_REFINED = "GraphRefined"
KMEANS_FALLBACK = "KMeansFallback"


@dataclass
class RefinerConfig:
    embedding_dim: int = 8
    lam: float = 0.1
    theta: float = 0.85
    learning_rate: float = 0.05
    max_iters: int = 300
    convergence_tol: float = 1e-5
    target_update_interval: int = 20
    min_group_size: int = 10
    min_mean_degree: float = 2.0
    # clusters smaller than this fraction of a refined group are reabsorbed
    # into the nearest surviving cluster (guards against splinter clusters
    # created by a handful of lexically perturbed requests)
    min_cluster_fraction: float = 0.2
    kmeans_iters: int = 50
    force_kmeans: bool = False
    global_seed: int = 0


@dataclass
class EndpointCluster:
    template: PathTemplate
    method: str
    member_ids: list[int] = field(default_factory=list)
    representative_paths: list[str] = field(default_factory=list)
    provenance: str = PASSTHROUGH


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60, 60)))


def consistency_loss(A: np.ndarray, Z: np.ndarray) -> tuple[float, np.ndarray]:
    """Squared Frobenius distance between A and sigma(Z Z^T), with gradient.

    The residual matrix R = (sigma(ZZ^T) - A) * sigma'(ZZ^T) is symmetric,
    so the gradient is 4 R Z (the factor 2 from the square times 2 from the
    symmetric pairing of Z in the Gram matrix).
    """
    if A.shape[0] != A.shape[1] or A.shape[0] != Z.shape[0]:
        raise ValueError("A must be n x n and Z must be n x d")
    S = _sigmoid(Z @ Z.T)
    diff = S - A
    loss = float(np.sum(diff * diff))
    R = diff * S * (1.0 - S)
    grad = 4.0 * (R @ Z)
    return loss, grad


def _soft_assign(Z: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Student-t (one dof) soft assignment Q and the raw kernel T."""
    d2 = np.sum((Z[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    T = 1.0 / (1.0 + d2)
    Q = T / T.sum(axis=1, keepdims=True)
    return Q, T


def sharpen_target(Q: np.ndarray) -> np.ndarray:
    """Self-training target P = Q^2 / f, row-normalized."""
    weight = Q**2 / Q.sum(axis=0, keepdims=True)
    return weight / weight.sum(axis=1, keepdims=True)


def clustering_regularizer(
    Z: np.ndarray, centroids: np.ndarray, P: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """KL(P || Q) of the Student-t soft assignment, with gradients.

    P is held constant; gradients are with respect to Z and the centroids.
    """
    if centroids.shape[0] < 1:
        raise ValueError("need at least one centroid")
    Q, T = _soft_assign(Z, centroids)
    eps = 1e-12
    loss = float(np.sum(P * (np.log(P + eps) - np.log(Q + eps))))
    coeff = T * (P - Q)  # n x k
    delta = Z[:, None, :] - centroids[None, :, :]  # n x k x d
    grad_z = 2.0 * np.sum(coeff[:, :, None] * delta, axis=1)
    grad_mu = -2.0 * np.sum(coeff[:, :, None] * delta, axis=0)
    return loss, grad_z, grad_mu


def farthest_point_indices(X: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    """Deterministic farthest-point seeding; first pick comes from the rng."""
    n = X.shape[0]
    first = int(rng.integers(n))
    chosen = [first]
    dist = np.linalg.norm(X - X[first], axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(X - X[nxt], axis=1))
    return chosen


def kmeans_assign(
    X: np.ndarray, k: int, rng: np.random.Generator, max_iters: int = 50
) -> np.ndarray:
    """Plain Lloyd iterations with farthest-point seeding."""
    centroids = X[farthest_point_indices(X, k, rng)].copy()
    labels = np.zeros(X.shape[0], dtype=int)
    for it in range(max_iters):
        d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        if it > 0 and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            mask = labels == c
            if mask.any():
                centroids[c] = X[mask].mean(axis=0)
    return labels


def spectral_init(graph: SimilarityGraph, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Top-d eigenvectors of the symmetrically normalized adjacency.

    Degenerate eigensolves (isolated graph, numerical failure) fall back to
    unit-variance random coordinates from the supplied rng.
    """
    n = graph.n
    dim = min(dim, n)
    A = graph.A
    degree = A.sum(axis=1)
    if not np.any(degree > 0):
        return rng.standard_normal((n, dim))
    d_inv_sqrt = np.zeros(n)
    d_inv_sqrt[degree > 0] = 1.0 / np.sqrt(degree[degree > 0])
    norm_adj = d_inv_sqrt[:, None] * A * d_inv_sqrt[None, :]
    try:
        eigvals, eigvecs = np.linalg.eigh(norm_adj)
    except np.linalg.LinAlgError:
        return rng.standard_normal((n, dim))
    # eigenvectors are unit-norm over n entries; weight each coordinate by the
    # (non-negative part of the) eigenvalue it belongs to, then rescale so rows
    # sit at O(1) magnitude — the scale the losses and centroid seeding expect.
    # Negative-eigenvalue directions carry no cluster structure and would
    # otherwise contribute spiky coordinates that hijack farthest-point seeding.
    order = np.argsort(eigvals)[::-1][:dim]
    weights = np.sqrt(np.clip(eigvals[order], 0.0, None))
    Z = eigvecs[:, order] * weights[None, :] * np.sqrt(n)
    if not np.all(np.isfinite(Z)):
        return rng.standard_normal((n, dim))
    if Z.shape[1] < dim:
        Z = np.hstack([Z, rng.standard_normal((n, dim - Z.shape[1]))])
    return Z


@dataclass
class TrainResult:
    Z: np.ndarray
    centroids: np.ndarray
    soft_assign: np.ndarray
    losses: list[float]


def train_embeddings(
    graph: SimilarityGraph, k: int, config: RefinerConfig, rng: np.random.Generator
) -> TrainResult:
    """Minimize L_cons + lambda * KL(P || Q) by backtracking gradient descent.

    The self-training target P is refreshed every ``target_update_interval``
    iterations; a refresh is kept only if it does not increase the recorded
    loss, which keeps the loss sequence non-increasing.
    """
    Z = spectral_init(graph, config.embedding_dim, rng)
    centroids = Z[farthest_point_indices(Z, k, rng)].copy()
    Q, _ = _soft_assign(Z, centroids)
    P = sharpen_target(Q)
    lr = config.learning_rate
    lam = config.lam

    def total(Zc, Cc, Pc):
        lc, gz = consistency_loss(graph.A, Zc)
        lk, gzk, gmk = clustering_regularizer(Zc, Cc, Pc)
        return lc + lam * lk, gz + lam * gzk, lam * gmk

    loss, grad_z, grad_mu = total(Z, centroids, P)
    losses = [loss]
    for iteration in range(config.max_iters):
        if iteration > 0 and iteration % config.target_update_interval == 0:
            # refresh step: re-center each centroid on its soft-assignment
            # weighted mean (keeps centroids inside the moving embedding
            # cloud), then re-sharpen the target; kept only when the total
            # loss does not increase so the recorded sequence stays monotone
            Q, _ = _soft_assign(Z, centroids)
            weights = Q / np.maximum(Q.sum(axis=0, keepdims=True), 1e-12)
            cand_C = weights.T @ Z
            cand_Q, _ = _soft_assign(Z, cand_C)
            candidate = sharpen_target(cand_Q)
            cand_loss, cand_gz, cand_gmu = total(Z, cand_C, candidate)
            if cand_loss <= loss + 1e-9:
                centroids = cand_C
                P, loss, grad_z, grad_mu = candidate, cand_loss, cand_gz, cand_gmu
            else:
                candidate = sharpen_target(Q)
                cand_loss, cand_gz, cand_gmu = total(Z, centroids, candidate)
                if cand_loss <= loss + 1e-9:
                    P, loss, grad_z, grad_mu = candidate, cand_loss, cand_gz, cand_gmu
        stepped = False
        for _ in range(30):
            Z_new = Z - lr * grad_z
            C_new = centroids - lr * grad_mu
            new_loss, new_gz, new_gmu = total(Z_new, C_new, P)
            if new_loss <= loss + 1e-9:
                Z, centroids = Z_new, C_new
                loss, grad_z, grad_mu = new_loss, new_gz, new_gmu
                stepped = True
                lr = min(lr * 1.1, config.learning_rate)
                break
            lr *= 0.5
        losses.append(loss)
        if not stepped:
            break
        if len(losses) > 10:
            prev = losses[-11]
            if prev > 0 and (prev - loss) / prev < config.convergence_tol:
                break
    Q, _ = _soft_assign(Z, centroids)
    return TrainResult(Z=Z, centroids=centroids, soft_assign=Q, losses=losses)


def _group_rng(global_seed: int, template: PathTemplate) -> np.random.Generator:
    key = f"{global_seed}:{template.method}:{template.render()}".encode()
    digest = hashlib.sha256(key).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _reabsorb_small(labels: np.ndarray, X: np.ndarray, min_size: int) -> np.ndarray:
    """Merge clusters below min_size into the nearest surviving centroid."""
    labels = labels.copy()
    while True:
        ids, counts = np.unique(labels, return_counts=True)
        small = [c for c, cnt in zip(ids, counts) if cnt < min_size]
        big = [c for c, cnt in zip(ids, counts) if cnt >= min_size]
        if not small or not big:
            return labels
        centroids = {c: X[labels == c].mean(axis=0) for c in ids}
        target_c = small[0]
        d = {c: np.linalg.norm(centroids[target_c] - centroids[c]) for c in big}
        dest = min(sorted(d), key=lambda c: d[c])
        labels[labels == target_c] = dest


def refine_group(
    group: TemplateGroup,
    requests: dict[int, NormalizedRequest],
    records: dict[int, HttpRecord],
    config: RefinerConfig | None = None,
) -> list[EndpointCluster]:
    """Split one template group into endpoint clusters per the two-stage scheme."""
    config = config or RefinerConfig()
    members = [requests[i] for i in group.member_ids]
    n = len(members)
    if n == 0:
        return []
    if n < 3:
        return [_cluster(group, group.member_ids, members, PASSTHROUGH)]

    raw = np.vstack([extract_features(nr, records[nr.record_id]) for nr in members])
    X = scale_features(raw)
    graph = build_graph(X, config.theta)
    k = select_k(graph)

    degree = (graph.A > 0).sum(axis=1)
    applicable = (
        not config.force_kmeans
        and n >= config.min_group_size
        and degree.mean() >= config.min_mean_degree
    )
    rng = _group_rng(config.global_seed, group.template)
    if applicable:
        result = train_embeddings(graph, k, config, rng)
        labels = np.argmax(result.soft_assign, axis=1)
        provenance = GRAPH_REFINED
    else:
        labels = kmeans_assign(X, k, rng, config.kmeans_iters)
        provenance = KMEANS_FALLBACK

    min_size = max(2, int(np.ceil(config.min_cluster_fraction * n)))
    labels = _reabsorb_small(labels, X, min_size)

    clusters = []
    for c in np.unique(labels):
        ids = [members[i].record_id for i in np.nonzero(labels == c)[0]]
        sub = [requests[i] for i in ids]
        clusters.append(_cluster(group, ids, sub, provenance))
    clusters.sort(key=lambda cl: min(cl.member_ids))
    return clusters


def _cluster(
    group: TemplateGroup,
    ids: list[int],
    members: list[NormalizedRequest],
    provenance: str,
) -> EndpointCluster:
    seen: list[str] = []
    for nr in sorted(members, key=lambda m: m.record_id):
        path = canonical_path(nr)
        if path not in seen:
            seen.append(path)
        if len(seen) == 3:
            break
    return EndpointCluster(
        template=group.template,
        method=group.template.method,
        member_ids=sorted(ids),
        representative_paths=seen,
        provenance=provenance,
    )


def discover(
    dataset: Dataset,
    filter_config: FilterConfig | None = None,
    miner_config: MinerConfig | None = None,
    refiner_config: RefinerConfig | None = None,
    disable_noise_filter: bool = False,
    disable_template_mining: bool = False,
) -> list[EndpointCluster]:
    """Full pipeline: filter, normalize, mine templates, refine each group."""
    refiner_config = refiner_config or RefinerConfig()
    records = {r.id: r for r in dataset.records}
    if disable_noise_filter:
        kept_ids = [r.id for r in dataset.records]
    else:
        kept_ids = filter_traffic(dataset, filter_config).kept
    normalized = [normalize(records[i]) for i in kept_ids]
    requests = {nr.record_id: nr for nr in normalized}
    if not normalized:
        return []

    if disable_template_mining:
        degenerate = TemplateGroup(
            template=PathTemplate(method="*", pattern=()),
            member_ids=[nr.record_id for nr in normalized],
            distinct_paths=len({canonical_path(nr) for nr in normalized}),
        )
        groups = [degenerate]
    else:
        groups = mine(normalized, miner_config)

    clusters: list[EndpointCluster] = []
    for group in groups:
        clusters.extend(refine_group(group, requests, records, refiner_config))
    clusters.sort(
        key=lambda cl: (cl.method, cl.template.render(), min(cl.member_ids))
    )
    return clusters
