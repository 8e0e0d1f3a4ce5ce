"""Separable benchmark objectives with reproducible instance transforms.

Self-contained on purpose: the execution sandbox keeps a verbatim mirror of
this module so that candidate programs can be scored in a separate process
against bit-identical functions (parity is pinned to 1e-9 by tests).

Function ids:
  1 sphere
  2 separable ellipsoid
  3 separable Rastrigin
  4 asymmetric Rastrigin (even coordinates scaled 10x on the positive side)
  5 linear slope (optimum on a corner of the box)

Instances shift the optimum and offset the value; no rotations are applied
(ids 1-5 stay separable by construction).
"""

from __future__ import annotations

import numpy as np

LOWER_BOUND = -5.0
UPPER_BOUND = 5.0

_SUITE_CODES = {"sbox_separable": 1, "affine_pair": 2}

#: Regret floor shared with the anytime metric.
REGRET_FLOOR = 1e-12


def instance_rng(suite: str, fid: int, instance: int, dim: int) -> np.random.Generator:
    return np.random.default_rng((_SUITE_CODES[suite], fid, instance, dim))


def instance_offsets(suite: str, fid: int, instance: int, dim: int) -> tuple[np.ndarray, float]:
    """(x_opt, f_opt) for one instance; identical across processes.

    The shift is uniform in [-4, 4]^dim. The linear slope (fid 5) instead
    pins its optimum to the box corner selected by the shift's signs, since
    a linear function has no interior minimum.
    """
    rng = instance_rng(suite, fid, instance, dim)
    shift = rng.uniform(-4.0, 4.0, dim)
    f_opt = float(np.round(rng.uniform(-100.0, 100.0), 2))
    if fid == 5:
        shift = np.where(shift >= 0.0, UPPER_BOUND, LOWER_BOUND)
    return shift, f_opt


def raw_value(fid: int, z: np.ndarray, x_opt: np.ndarray) -> float:
    """Regret of the candidate point: 0 at the optimum, positive elsewhere.

    ``z`` is the already-shifted point ``x - x_opt`` for fids 1-4; fid 5
    receives the raw point (its x_opt enters through the slope signs).
    """
    d = len(z)
    if fid == 1:
        return float(np.sum(z * z))
    if fid == 2:
        exponents = 6.0 * np.arange(d) / (d - 1) if d > 1 else np.zeros(1)
        return float(np.sum(10.0**exponents * z * z))
    if fid == 3:
        return float(10.0 * (d - np.sum(np.cos(2.0 * np.pi * z))) + np.sum(z * z))
    if fid == 4:
        scale = np.where((z > 0.0) & (np.arange(d) % 2 == 0), 10.0, 1.0)
        s = scale * z
        return float(10.0 * (d - np.sum(np.cos(2.0 * np.pi * s))) + np.sum(s * s))
    if fid == 5:
        exponents = np.arange(d) / (d - 1) if d > 1 else np.zeros(1)
        slope = np.sign(x_opt) * 10.0**exponents
        return float(np.sum(UPPER_BOUND * np.abs(slope) - slope * z))
    raise ValueError(f"unknown fid {fid}")


def single_value(suite: str, fid: int, instance: int, dim: int, x: np.ndarray) -> float:
    """f(x) = regret + instance offset for one separable function."""
    x_opt, f_opt = instance_offsets(suite, fid, instance, dim)
    z = x if fid == 5 else x - x_opt
    return raw_value(fid, z, x_opt) + f_opt


def affine_pair_value(
    fid_a: int, fid_b: int, alpha: float, instance: int, dim: int, x: np.ndarray
) -> tuple[float, float]:
    """(value, f_opt) of a log-regret interpolation of two functions.

    Both components share one instance-seeded shift so the combination has a
    single known optimum; component regrets are floored at REGRET_FLOOR
    before the geometric blend.
    """
    x_opt, f_opt = instance_offsets("affine_pair", fid_a * 100 + fid_b, instance, dim)
    z = x - x_opt
    r_a = max(raw_value(fid_a, z, x_opt), REGRET_FLOOR)
    r_b = max(raw_value(fid_b, z, x_opt), REGRET_FLOOR)
    blended = 10.0 ** ((1.0 - alpha) * np.log10(r_a) + alpha * np.log10(r_b))
    return float(blended + f_opt), f_opt
