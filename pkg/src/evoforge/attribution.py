"""Per-feature attributions for the surrogate and their prompt rendering.

Attributions use the path-dependent tree decomposition: while walking a
tree, features not yet conditioned on are integrated out with the training
covers as weights.  Each tree's attributions are computed in polynomial
time by carrying a path of (feature, zero-fraction, one-fraction, weight)
elements, then summed over trees and scaled by the learning rate.  The
base value is the cover-weighted expected ensemble output, so
``phi0 + sum(phi) == predict(x)`` up to float error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .features import FEATURE_NAMES, human_feature_name, machine_feature_name
from .surrogate import DimensionMismatch, SurrogateModel, TreeNode

#: Attributions smaller than this carry no usable signal.
NO_SIGNAL_EPS = 1e-12

GUIDANCE_TEMPLATE = "Based on archive analysis, try to {direction} the {feature} of the solution."

_SENTENCE_RE = re.compile(r"try to (increase|decrease) the (.+?) of the solution\.")


@dataclass(frozen=True)
class Attribution:
    phi0: float
    phi: tuple[float, ...]
    point: tuple[float, ...]
    prediction: float


@dataclass(frozen=True)
class Guidance:
    feature_name: str
    direction: str  # "increase" | "decrease"
    magnitude: float


@dataclass
class _PathElement:
    feature: int
    zero: float
    one: float
    weight: float


def _extend(path: list[_PathElement], pz: float, po: float, pf: int) -> list[_PathElement]:
    out = [_PathElement(el.feature, el.zero, el.one, el.weight) for el in path]
    depth = len(out)
    out.append(_PathElement(pf, pz, po, 1.0 if depth == 0 else 0.0))
    for i in range(depth - 1, -1, -1):
        out[i + 1].weight += po * out[i].weight * (i + 1) / (depth + 1)
        out[i].weight = pz * out[i].weight * (depth - i) / (depth + 1)
    return out


def _unwind(path: list[_PathElement], index: int) -> list[_PathElement]:
    out = [_PathElement(el.feature, el.zero, el.one, el.weight) for el in path]
    depth = len(out) - 1
    one = out[index].one
    zero = out[index].zero
    carry = out[depth].weight
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            kept = out[i].weight
            out[i].weight = carry * (depth + 1) / ((i + 1) * one)
            carry = kept - out[i].weight * zero * (depth - i) / (depth + 1)
        else:
            out[i].weight = out[i].weight * (depth + 1) / (zero * (depth - i))
    for i in range(index, depth):
        out[i].feature = out[i + 1].feature
        out[i].zero = out[i + 1].zero
        out[i].one = out[i + 1].one
    out.pop()
    return out


def _unwound_sum(path: list[_PathElement], index: int) -> float:
    depth = len(path) - 1
    one = path[index].one
    zero = path[index].zero
    total = 0.0
    if one != 0.0:
        carry = path[depth].weight
        for i in range(depth - 1, -1, -1):
            part = carry * (depth + 1) / ((i + 1) * one)
            total += part
            carry = path[i].weight - part * zero * (depth - i) / (depth + 1)
    else:
        for i in range(depth - 1, -1, -1):
            total += path[i].weight * (depth + 1) / (zero * (depth - i))
    return total


def _tree_phi(root: TreeNode, x: Sequence[float], phi: list[float]) -> None:
    def recurse(node: TreeNode, path: list[_PathElement], pz: float, po: float, pf: int) -> None:
        path = _extend(path, pz, po, pf)
        if node.is_leaf:
            for i in range(1, len(path)):
                w = _unwound_sum(path, i)
                el = path[i]
                phi[el.feature] += w * (el.one - el.zero) * node.value
            return
        if x[node.feature] <= node.threshold:
            hot, cold = node.left, node.right
        else:
            hot, cold = node.right, node.left
        incoming_zero = 1.0
        incoming_one = 1.0
        found = 0
        for i in range(1, len(path)):
            if path[i].feature == node.feature:
                found = i
                break
        if found:
            incoming_zero = path[found].zero
            incoming_one = path[found].one
            path = _unwind(path, found)
        recurse(hot, path, incoming_zero * hot.cover / node.cover, incoming_one, node.feature)
        recurse(cold, path, incoming_zero * cold.cover / node.cover, 0.0, node.feature)

    recurse(root, [], 1.0, 1.0, -1)


def shap_values(model: SurrogateModel, x: Sequence[float]) -> Attribution:
    """Exact path-dependent attributions of ``model`` at ``x``."""
    x = tuple(getattr(x, "values", x))
    if len(x) != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} features, got {len(x)}")
    phi = [0.0] * model.n_features
    expected = 0.0
    for tree in model.trees:
        _tree_phi(tree.root, x, phi)
        expected += tree.expected_value()
    lr = model.learning_rate
    return Attribution(
        phi0=model.base_prediction + lr * expected,
        phi=tuple(lr * p for p in phi),
        point=x,
        prediction=model.predict(x),
    )


def select_guidance(
    attr: Attribution, names: Sequence[str] = FEATURE_NAMES
) -> Optional[Guidance]:
    """Single strongest feature and the direction its sign implies.

    Largest absolute attribution wins, ties to the lowest index; a positive
    value reads "this feature's level pushes predicted fitness up", hence
    "increase".  Returns None when no attribution is distinguishable from
    zero.
    """
    if len(attr.phi) != len(names):
        raise DimensionMismatch(f"{len(attr.phi)} attributions for {len(names)} names")
    k = max(range(len(attr.phi)), key=lambda j: (abs(attr.phi[j]), -j))
    magnitude = abs(attr.phi[k])
    if magnitude < NO_SIGNAL_EPS:
        return None
    direction = "increase" if attr.phi[k] > 0 else "decrease"
    return Guidance(feature_name=names[k], direction=direction, magnitude=magnitude)


def render_guidance(guidance: Guidance) -> str:
    return GUIDANCE_TEMPLATE.format(
        direction=guidance.direction,
        feature=human_feature_name(guidance.feature_name),
    )


def parse_guidance_sentence(text: str) -> Optional[tuple[str, str]]:
    """(feature_name, direction) recovered from a rendered sentence, or None."""
    match = _SENTENCE_RE.search(text)
    if not match:
        return None
    return machine_feature_name(match.group(2)), match.group(1)
