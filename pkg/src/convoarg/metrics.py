"""Node centralities on the combined attack/defence digraph.

All three measures treat the graph as simple, directed and unweighted, with
edges pointing from attacker/defender to target.
"""

from __future__ import annotations

import csv
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

DAMPING = 0.85
TOLERANCE = 1e-9
MAX_ITER = 1000


class NonConvergence(RuntimeWarning):
    """Power iteration hit its cap; the returned scores are the last iterate."""


@dataclass(frozen=True)
class CentralityScores:
    betweenness: dict
    eigenvector: dict
    closeness: dict
    converged: bool = True


def _adjacency(nodes, edges):
    """Successor lists indexed by node position, duplicates and loops dropped."""
    index = {v: i for i, v in enumerate(nodes)}
    succ = [[] for _ in nodes]
    seen = set()
    for a, b in edges:
        i, j = index[a], index[b]
        if i == j or (i, j) in seen:
            continue
        seen.add((i, j))
        succ[i].append(j)
    return succ


def _graph_parts(g):
    if hasattr(g, "union_edges"):
        return list(g.nodes), g.union_edges()
    nodes, edges = g
    return list(nodes), list(edges)


def betweenness(g) -> dict:
    """Unnormalised directed betweenness via Brandes' dependency accumulation.

    ``g`` is an :class:`ArgGraph` or a ``(nodes, edges)`` pair.
    """
    nodes, edges = _graph_parts(g)
    succ = _adjacency(nodes, edges)
    n = len(nodes)
    cb = [0.0] * n
    for s in range(n):
        stack = []
        preds = [[] for _ in range(n)]
        sigma = [0] * n
        dist = [-1] * n
        sigma[s] = 1
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in succ[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    return dict(zip(nodes, cb))


def eigenvector_centrality(g, damping=DAMPING, tol=TOLERANCE, max_iter=MAX_ITER,
                           return_converged=False):
    """Damped in-link power iteration (PageRank form).

    A node's score grows with the scores of the nodes pointing at it. Mass on
    nodes without out-links is spread uniformly. Scores sum to one.
    """
    nodes, edges = _graph_parts(g)
    n = len(nodes)
    if n == 0:
        return ({}, True) if return_converged else {}
    succ = _adjacency(nodes, edges)
    outdeg = np.array([len(s) for s in succ], dtype=float)
    src = np.array([i for i, s in enumerate(succ) for _ in s], dtype=np.intp)
    dst = np.array([j for s in succ for j in s], dtype=np.intp)
    weight = 1.0 / outdeg[src] if len(src) else np.zeros(0)
    dangling = outdeg == 0

    x = np.full(n, 1.0 / n)
    converged = False
    for _ in range(max_iter):
        flow = np.zeros(n)
        np.add.at(flow, dst, x[src] * weight)
        new = damping * (flow + x[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        change = np.abs(new - x).sum()
        x = new
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"eigenvector centrality did not converge in {max_iter} iterations",
                      NonConvergence, stacklevel=2)
    scores = dict(zip(nodes, x.tolist()))
    return (scores, converged) if return_converged else scores


def closeness(g) -> dict:
    """Harmonic closeness: sum of 1/d(v, u) over nodes reachable from v."""
    nodes, edges = _graph_parts(g)
    succ = _adjacency(nodes, edges)
    out = []
    for s in range(len(nodes)):
        dist = {s: 0}
        queue = deque([s])
        total = 0.0
        while queue:
            v = queue.popleft()
            for w in succ[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    total += 1.0 / dist[w]
                    queue.append(w)
        out.append(total)
    return dict(zip(nodes, out))


def centralities(g) -> CentralityScores:
    eig, ok = eigenvector_centrality(g, return_converged=True)
    return CentralityScores(betweenness(g), eig, closeness(g), ok)


CSV_COLUMNS = ("conversation_id", "node_id", "betweenness", "eigenvector", "closeness")


def centrality_rows(conversation_id, scores: CentralityScores):
    for node in scores.betweenness:
        yield (conversation_id, node, scores.betweenness[node],
               scores.eigenvector[node], scores.closeness[node])


def read_centrality_csv(path) -> dict:
    """Map conversation id -> CentralityScores."""
    acc = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parts = acc.setdefault(row["conversation_id"], ({}, {}, {}))
            node = row["node_id"]
            parts[0][node] = float(row["betweenness"])
            parts[1][node] = float(row["eigenvector"])
            parts[2][node] = float(row["closeness"])
    return {cid: CentralityScores(*parts) for cid, parts in acc.items()}
