"""Independent oracles used by the test suite.

The subset-enumeration Shapley oracle below shares only the model data
structures with the production code; the attribution math is computed the
slow, definitional way (all 2^d feature subsets with cover-weighted
conditional expectations).
"""

from math import factorial

from evoforge.surrogate import SurrogateModel, TreeNode


def conditional_expectation(node: TreeNode, x, subset: frozenset) -> float:
    if node.is_leaf:
        return node.value
    if node.feature in subset:
        child = node.left if x[node.feature] <= node.threshold else node.right
        return conditional_expectation(child, x, subset)
    left = conditional_expectation(node.left, x, subset)
    right = conditional_expectation(node.right, x, subset)
    return (node.left.cover * left + node.right.cover * right) / node.cover


def brute_force_attribution(model: SurrogateModel, x):
    """(phi0, phi) by exhaustive Shapley enumeration; exponential in d."""
    d = model.n_features
    phi = [0.0] * d
    expected = 0.0
    for tree in model.trees:
        values = [0.0] * (1 << d)
        for mask in range(1 << d):
            subset = frozenset(j for j in range(d) if (mask >> j) & 1)
            values[mask] = conditional_expectation(tree.root, x, subset)
        expected += values[0]
        for j in range(d):
            bit = 1 << j
            for mask in range(1 << d):
                if mask & bit:
                    continue
                s = bin(mask).count("1")
                weight = factorial(s) * factorial(d - s - 1) / factorial(d)
                phi[j] += weight * (values[mask | bit] - values[mask])
    lr = model.learning_rate
    phi0 = model.base_prediction + lr * expected
    return phi0, [lr * p for p in phi]
