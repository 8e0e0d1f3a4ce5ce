"""Structural analysis of candidate source code.

A candidate program is parsed into its syntax tree, the tree is flattened
into a rooted directed graph (one node per syntax-tree node, edges from
parent to child), and a fixed-order vector of 22 graph-theoretic and
per-function complexity metrics is derived from it.  The whole pipeline is
a pure function of the source text, so vectors are cached by content and
never recomputed for unchanged programs.
"""

from __future__ import annotations

import ast
import io
import math
import tokenize
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

#: Canonical feature order. Index positions are load-bearing: the surrogate,
#: the attribution step and the prompt renderer all address features by this
#: order, and prompts use the names verbatim (underscores become spaces).
FEATURE_NAMES: tuple[str, ...] = (
    "node_count",
    "edge_count",
    "degree_mean",
    "degree_variance",
    "degree_entropy",
    "max_degree",
    "depth_min",
    "depth_mean",
    "depth_max",
    "avg_clustering",
    "degree_assortativity",
    "diameter",
    "avg_shortest_path",
    "function_count",
    "total_cyclomatic_complexity",
    "mean_cyclomatic_complexity",
    "max_cyclomatic_complexity",
    "total_token_count",
    "mean_token_count",
    "total_parameter_count",
    "mean_parameter_count",
    "max_parameter_count",
)

FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


def human_feature_name(name: str) -> str:
    """Prompt-facing spelling of a canonical feature name."""
    return name.replace("_", " ")


def machine_feature_name(text: str) -> str:
    """Inverse of :func:`human_feature_name`."""
    return text.strip().replace(" ", "_")


class ParseError(Exception):
    """Candidate source is not syntactically valid."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class GraphNode:
    id: int
    kind: str
    is_leaf: bool


@dataclass(frozen=True)
class SyntaxGraph:
    """Rooted syntax tree as an explicit node/edge list.

    Node ids are dense 0..n-1 in depth-first pre-order, which makes the
    graph (and everything derived from it) reproducible across runs.
    """

    nodes: tuple[GraphNode, ...]
    edges: tuple[tuple[int, int], ...]
    root_id: int = 0

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def _parse(code: str) -> ast.AST:
    try:
        return ast.parse(code)
    except SyntaxError as exc:
        raise ParseError(str(exc), line=exc.lineno, column=exc.offset) from exc


def parse_to_graph(code: str) -> SyntaxGraph:
    """Parse ``code`` and flatten its syntax tree into a :class:`SyntaxGraph`.

    Every syntax-tree node becomes a graph node labelled with its node kind;
    edges run parent -> child in source order.  Raises :class:`ParseError`
    for invalid input.
    """
    tree = _parse(code)
    nodes: list[GraphNode] = []
    edges: list[tuple[int, int]] = []
    # Explicit stack for pre-order ids; children pushed reversed so the
    # leftmost child is visited first.
    stack: list[tuple[ast.AST, int]] = [(tree, -1)]
    while stack:
        node, parent_id = stack.pop()
        node_id = len(nodes)
        children = list(ast.iter_child_nodes(node))
        nodes.append(GraphNode(node_id, type(node).__name__, not children))
        if parent_id >= 0:
            edges.append((parent_id, node_id))
        for child in reversed(children):
            stack.append((child, node_id))
    return SyntaxGraph(tuple(nodes), tuple(edges))


def _degree_entropy(degrees: list[int]) -> float:
    counts = Counter(degrees)
    n = len(degrees)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def _degree_assortativity(degrees: list[int], edges: Iterable[tuple[int, int]]) -> float:
    # Pearson correlation of endpoint degrees over both orientations of
    # every edge; 0.0 when the denominator degenerates (uniform degrees).
    xs: list[int] = []
    ys: list[int] = []
    for u, v in edges:
        xs.extend((degrees[u], degrees[v]))
        ys.extend((degrees[v], degrees[u]))
    if not xs:
        return 0.0
    m = len(xs)
    mean_x = sum(xs) / m
    mean_y = sum(ys) / m
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(xs, ys)) / m
    var_x = sum((a - mean_x) ** 2 for a in xs) / m
    var_y = sum((b - mean_y) ** 2 for b in ys) / m
    denom = math.sqrt(var_x * var_y)
    if denom <= 0.0:
        return 0.0
    return cov / denom


def _avg_clustering(adjacency: list[set[int]]) -> float:
    # Local coefficient per node: edges among neighbours / possible pairs.
    # Identically 0 on trees (no triangles); computed honestly anyway.
    n = len(adjacency)
    total = 0.0
    for v in range(n):
        neighbours = sorted(adjacency[v])
        k = len(neighbours)
        if k < 2:
            continue
        links = 0
        for i, u in enumerate(neighbours):
            adj_u = adjacency[u]
            links += sum(1 for w in neighbours[i + 1 :] if w in adj_u)
        total += 2.0 * links / (k * (k - 1))
    return total / n


def _bfs_farthest(adjacency: list[set[int]], start: int) -> tuple[int, int]:
    dist = {start: 0}
    frontier = [start]
    far_node, far_dist = start, 0
    while frontier:
        nxt: list[int] = []
        for u in frontier:
            for w in adjacency[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    if dist[w] > far_dist:
                        far_node, far_dist = w, dist[w]
                    nxt.append(w)
        frontier = nxt
    return far_node, far_dist


def compute_graph_metrics(graph: SyntaxGraph) -> dict[str, float]:
    """First 13 canonical features, computed on the undirected view.

    Depth statistics are over leaf depths with the root at depth 0.
    Diameter and average shortest path use tree-exact algorithms (double
    BFS and per-edge subtree counting) that equal the all-pairs BFS values.
    Degenerate single-node graphs map to all-zero metrics.
    """
    n = graph.node_count
    if n == 1:
        return {name: 0.0 for name in FEATURE_NAMES[:13]} | {"node_count": 1.0}

    adjacency: list[set[int]] = [set() for _ in range(n)]
    children: list[list[int]] = [[] for _ in range(n)]
    for u, v in graph.edges:
        adjacency[u].add(v)
        adjacency[v].add(u)
        children[u].append(v)

    degrees = [len(a) for a in adjacency]
    degree_mean = sum(degrees) / n
    degree_variance = sum((d - degree_mean) ** 2 for d in degrees) / n

    # Leaf depths via DFS over the rooted (directed) tree.
    depth = [0] * n
    order: list[int] = []
    stack = [graph.root_id]
    while stack:
        u = stack.pop()
        order.append(u)
        for w in children[u]:
            depth[w] = depth[u] + 1
            stack.append(w)
    leaf_depths = [depth[node.id] for node in graph.nodes if node.is_leaf]

    # Subtree sizes in reverse DFS order give the pairwise-distance sum:
    # every unordered pair's path crosses an edge exactly once, so
    # sum over edges of size_below * (n - size_below) counts all distances.
    subtree = [1] * n
    for u in reversed(order):
        for w in children[u]:
            subtree[u] += subtree[w]
    dist_sum = sum(subtree[w] * (n - subtree[w]) for u in range(n) for w in children[u])
    avg_shortest_path = dist_sum / (n * (n - 1) / 2)

    far, _ = _bfs_farthest(adjacency, graph.root_id)
    _, diameter = _bfs_farthest(adjacency, far)

    return {
        "node_count": float(n),
        "edge_count": float(graph.edge_count),
        "degree_mean": degree_mean,
        "degree_variance": degree_variance,
        "degree_entropy": _degree_entropy(degrees),
        "max_degree": float(max(degrees)),
        "depth_min": float(min(leaf_depths)),
        "depth_mean": sum(leaf_depths) / len(leaf_depths),
        "depth_max": float(max(leaf_depths)),
        "avg_clustering": _avg_clustering(adjacency),
        "degree_assortativity": _degree_assortativity(degrees, graph.edges),
        "diameter": float(diameter),
        "avg_shortest_path": avg_shortest_path,
    }


@dataclass(frozen=True)
class FunctionComplexity:
    name: str
    cyclomatic: int
    tokens: int
    parameters: int


@dataclass(frozen=True)
class ComplexityProfile:
    """Per-function complexity records plus their aggregates."""

    functions: tuple[FunctionComplexity, ...]

    @property
    def function_count(self) -> int:
        return len(self.functions)

    def _agg(self, attr: str) -> tuple[float, float, float]:
        values = [getattr(f, attr) for f in self.functions]
        if not values:
            return 0.0, 0.0, 0.0
        return float(sum(values)), sum(values) / len(values), float(max(values))

    def as_features(self) -> dict[str, float]:
        cyc_total, cyc_mean, cyc_max = self._agg("cyclomatic")
        tok_total, tok_mean, _ = self._agg("tokens")
        par_total, par_mean, par_max = self._agg("parameters")
        return {
            "function_count": float(self.function_count),
            "total_cyclomatic_complexity": cyc_total,
            "mean_cyclomatic_complexity": cyc_mean,
            "max_cyclomatic_complexity": cyc_max,
            "total_token_count": tok_total,
            "mean_token_count": tok_mean,
            "total_parameter_count": par_total,
            "mean_parameter_count": par_mean,
            "max_parameter_count": par_max,
        }


_FUNCTION_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)

# Lexical leaves only: identifiers/keywords (NAME), literals, operators and
# punctuation. Comments and layout tokens are excluded, which is what makes
# token counts invariant under comment edits.
_COUNTED_TOKEN_TYPES = frozenset({tokenize.NAME, tokenize.NUMBER, tokenize.STRING, tokenize.OP})


def _cyclomatic(fn: ast.AST) -> int:
    count = 1
    stack = list(ast.iter_child_nodes(fn))
    while stack:
        node = stack.pop()
        if isinstance(node, _FUNCTION_NODES):
            continue  # nested defs are scored as their own records
        if isinstance(node, (ast.If, ast.IfExp, ast.For, ast.AsyncFor, ast.While, ast.Assert)):
            count += 1
        elif isinstance(node, ast.ExceptHandler):
            count += 1
        elif isinstance(node, ast.BoolOp):
            count += len(node.values) - 1
        elif isinstance(node, ast.comprehension):
            count += len(node.ifs)
        elif isinstance(node, ast.match_case):
            count += 1
        stack.extend(ast.iter_child_nodes(node))
    return count


def _parameter_count(fn: ast.AST) -> int:
    a = fn.args
    count = len(a.posonlyargs) + len(a.args) + len(a.kwonlyargs)
    count += 1 if a.vararg else 0
    count += 1 if a.kwarg else 0
    return count


def _lexical_tokens(code: str) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    spans = []
    for tok in tokenize.generate_tokens(io.StringIO(code).readline):
        if tok.type in _COUNTED_TOKEN_TYPES:
            spans.append((tok.start, tok.end))
    return spans


def compute_complexity(code: str) -> ComplexityProfile:
    """Per-function cyclomatic complexity, token and parameter counts.

    Functions are ``def``/``async def`` statements anywhere in the tree
    (methods included).  Tokens are the lexical leaves inside the function's
    source span, decorators included, comments excluded.  Module-level code
    outside any function contributes nothing here.
    """
    tree = _parse(code)
    try:
        token_spans = _lexical_tokens(code)
    except tokenize.TokenizeError as exc:  # pragma: no cover - parse succeeded
        raise ParseError(str(exc)) from exc

    records = []
    for node in ast.walk(tree):
        if not isinstance(node, _FUNCTION_NODES):
            continue
        start_line = min([node.lineno] + [d.lineno for d in node.decorator_list])
        start = (start_line, 0)
        end = (node.end_lineno, node.end_col_offset)
        tokens = sum(1 for s, e in token_spans if s >= start and e <= end)
        records.append(
            (
                start,
                FunctionComplexity(
                    name=node.name,
                    cyclomatic=_cyclomatic(node),
                    tokens=tokens,
                    parameters=_parameter_count(node),
                ),
            )
        )
    records.sort(key=lambda item: item[0])
    return ComplexityProfile(tuple(record for _, record in records))


@dataclass(frozen=True)
class FeatureVector:
    """22 metrics in canonical order; always finite."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {len(self.values)}")

    def __getitem__(self, index: int) -> float:
        return self.values[index]

    def __len__(self) -> int:
        return len(self.values)

    def get(self, name: str) -> float:
        return self.values[FEATURE_INDEX[name]]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))


@lru_cache(maxsize=8192)
def _extract_cached(code: str) -> FeatureVector:
    metrics = compute_graph_metrics(parse_to_graph(code))
    metrics.update(compute_complexity(code).as_features())
    return FeatureVector(tuple(float(metrics[name]) for name in FEATURE_NAMES))


def extract_features(code: str) -> FeatureVector:
    """Full 22-slot feature vector for ``code``; cached by content."""
    return _extract_cached(code)
