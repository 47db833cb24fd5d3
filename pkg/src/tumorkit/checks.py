"""Self-verification suites behind ``tumorkit checks``.

``kernels`` runs finite-difference gradient checks and closed-form checks of
the network kernels.  ``metrics`` compares Dice and HD95 against exhaustive
brute-force implementations on random mask pairs.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist

from .kernels import (
    AxialAttentionConfig,
    GroupNormConfig,
    OpCounter,
    axial_attention,
    conv3_downsample,
    grad_check,
    group_norm,
    group_stats,
    patchify,
    sigmoid_bce_with_logits,
    unpatchify,
)
from .segmetrics import dice, hd95, percentile_index
from .volume import BinaryMask

GRAD_H = 1e-4
GRAD_TOL = 1e-5


# -- differentiable adapters: keyword arrays in, (output, backward) out ------

def group_norm_op(groups: int, eps: float = 1e-5, fault: float = 1.0) -> Callable:
    def op(x, gamma, beta):
        y, back = group_norm(x, GroupNormConfig(groups, eps, gamma, beta))

        def backward(g):
            grads = back(g)
            grads["x"] = grads["x"] * fault
            return grads

        return y, backward

    op.__name__ = "group_norm"
    return op


def bce_op(targets: np.ndarray) -> Callable:
    def op(logits):
        loss, grad = sigmoid_bce_with_logits(logits, targets)
        return loss, lambda g: {"logits": g * grad}

    op.__name__ = "sigmoid_bce_with_logits"
    return op


def conv_op(x, kernel):
    return conv3_downsample(x, kernel)


conv_op.__name__ = "conv3_downsample"


def attention_op(axis, heads: int, head_dim: int, with_pos: bool) -> Callable:
    def op(x, wq, wk, wv, wo, pos=None):
        cfg = AxialAttentionConfig(axis, heads, head_dim, wq, wk, wv, wo, pos if with_pos else None)
        return axial_attention(x, cfg)

    op.__name__ = "axial_attention"
    return op


def kernel_cases(seed: int = 0) -> list[tuple[str, Callable, dict]]:
    """Randomized gradient-check fixtures: five shapes per kernel."""
    rng = np.random.default_rng(seed)
    cases = []

    for c, g, sp in [(64, 32, (4, 4, 4)), (8, 4, (3, 4, 5)), (6, 3, (2, 3, 2)), (4, 1, (3, 3, 3)), (32, 32, (2, 2, 3))]:
        x = rng.normal(size=(c,) + sp) * rng.uniform(0.5, 3) + rng.normal()
        inputs = {"x": x, "gamma": rng.normal(1.0, 0.3, size=c), "beta": rng.normal(size=c)}
        cases.append((f"group_norm C={c} G={g} {sp}", group_norm_op(g), inputs))

    for shape in [(7,), (3, 5), (2, 3, 4, 4), (1, 4, 4, 4), (16, 9)]:
        logits = rng.normal(scale=3.0, size=shape)
        targets = rng.uniform(size=shape)
        cases.append((f"sigmoid_bce {shape}", bce_op(targets), {"logits": logits}))

    for cin, cout, sp in [(1, 1, (4, 4, 4)), (2, 3, (5, 4, 3)), (3, 2, (3, 3, 3)), (2, 2, (6, 2, 5)), (1, 4, (1, 3, 2))]:
        inputs = {"x": rng.normal(size=(cin,) + sp), "kernel": rng.normal(size=(cout, cin, 3, 3, 3))}
        cases.append((f"conv3_downsample {cin}->{cout} {sp}", conv_op, inputs))

    for c, heads, axis, sp, with_pos in [
        (8, 2, "width", (4, 4, 4), True),
        (8, 2, "depth", (4, 4, 4), False),
        (4, 1, "height", (2, 5, 3), True),
        (6, 3, "width", (3, 2, 4), True),
        (4, 2, 2, (1, 3, 2), True),
    ]:
        ax = {"depth": 1, "height": 2, "width": 3}.get(axis, axis)
        cfg = AxialAttentionConfig.random(c, axis, heads, extent=sp[ax - 1], rng=rng, scale=1.0)
        inputs = {"x": rng.normal(size=(c,) + sp), "wq": cfg.wq, "wk": cfg.wk, "wv": cfg.wv, "wo": cfg.wo}
        if with_pos:
            inputs["pos"] = cfg.pos
        op = attention_op(axis, heads, cfg.head_dim, with_pos)
        cases.append((f"axial_attention C={c} h={heads} axis={axis} {sp} pos={with_pos}", op, inputs))
    return cases


def closed_form_checks(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    results = []

    x = rng.normal(3.0, 2.0, size=(64, 4, 4, 4))
    cfg = GroupNormConfig(32)
    y, _ = group_norm(x, cfg)
    mean, var = group_stats(y, 32)
    # eps shrinks the normalized variance to v / (v + eps); undo that factor
    raw_var = group_stats(x, 32)[1]
    var_err = np.abs(var * (raw_var + cfg.eps) / raw_var - 1)
    results.append({
        "check": "group_norm per-group moments",
        "max_abs_mean": float(np.abs(mean).max()),
        "max_abs_var_minus_1": float(var_err.max()),
        "pass": bool(np.abs(mean).max() < 1e-10 and var_err.max() < 1e-8),
    })

    cfg = AxialAttentionConfig.random(6, "depth", 2, extent=1, rng=rng)
    x = rng.normal(size=(6, 1, 3, 4))
    y, _ = axial_attention(x, cfg)
    expected = np.einsum("ci,ij,jdhw->cdhw", cfg.wo, cfg.wv, x)
    diff = float(np.abs(y - expected).max())
    results.append({"check": "axial_attention extent-1 value pathway", "max_abs_err": diff, "pass": diff < 1e-12})

    x = rng.normal(size=(3, 4, 6, 8))
    rt = unpatchify(patchify(x, 2), x.shape, 2)
    results.append({"check": "patchify round trip", "pass": bool(np.array_equal(rt, x))})

    cfg = AxialAttentionConfig.random(4, "width", 2, extent=5, rng=rng)
    x = rng.normal(size=(4, 3, 3, 5))
    y0, _ = axial_attention(x, cfg)
    x2 = x.copy()
    x2[:, 1, 2, 3] += 10.0
    y1, _ = axial_attention(x2, cfg)
    same = np.array_equal(y0[:, 0], y1[:, 0]) and np.array_equal(y0[:, 1, :2], y1[:, 1, :2])
    results.append({"check": "axial_attention locality", "pass": bool(same)})

    counts = []
    for d in (3, 6):
        counter = OpCounter()
        cfg = AxialAttentionConfig.random(4, "width", 2, extent=5, rng=np.random.default_rng(1))
        axial_attention(np.zeros((4, d, 2, 5)), cfg, counter)
        counts.append(counter.multiplies)
    results.append({
        "check": "axial_attention linear scaling",
        "multiplies": counts,
        "pass": counts[1] == 2 * counts[0],
    })
    return results


def run_kernel_suite(seed: int = 0, inject_fault: bool = False) -> dict:
    cases = kernel_cases(seed)
    if inject_fault:
        rng = np.random.default_rng(seed + 1)
        x = rng.normal(size=(8, 3, 3, 3))
        cases.append((
            "group_norm[fault: grad x1.01]",
            group_norm_op(4, fault=1.01),
            {"x": x, "gamma": np.ones(8), "beta": np.zeros(8)},
        ))
    grads = []
    for label, op, inputs in cases:
        rep = grad_check(op, inputs, h=GRAD_H, tol=GRAD_TOL, seed=seed, name=label)
        grads.append(rep.to_dict())
    closed = closed_form_checks(seed)
    ok = all(r["pass"] for r in grads) and all(r["pass"] for r in closed)
    failing = [r["op"] for r in grads if not r["pass"]] + [r["check"] for r in closed if not r["pass"]]
    return {"suite": "kernels", "pass": ok, "failing": failing, "grad_checks": grads, "closed_form": closed}


# -- brute-force metric oracles ------------------------------------------------

def brute_dice(a: np.ndarray, b: np.ndarray) -> Fraction:
    inter = na = nb = 0
    for va, vb in zip(a.ravel().tolist(), b.ravel().tolist()):
        na += va
        nb += vb
        inter += va and vb
    if na + nb == 0:
        return Fraction(1)
    return Fraction(2 * inter, na + nb)


def _brute_surface(a: np.ndarray) -> np.ndarray:
    """Coordinates of voxels removed by a 6-neighborhood erosion."""
    eroded = ndimage.binary_erosion(a, structure=ndimage.generate_binary_structure(3, 1), border_value=0)
    return np.argwhere(a & ~eroded).astype(np.float64)


def brute_hd95(a: np.ndarray, b: np.ndarray, spacing) -> float:
    """All-pairs surface distances, pooled and ranked."""
    d = cdist(_brute_surface(a) * spacing, _brute_surface(b) * spacing)
    pooled = np.sort(np.concatenate([d.min(axis=1), d.min(axis=0)]))
    return float(pooled[percentile_index(len(pooled))])


SPACINGS = [(1.0, 1.0, 1.0), (1.0, 1.0, 2.5), (2.0, 0.7, 1.3), (1.5, 1.5, 1.5)]


def random_mask(rng: np.random.Generator, size: int = 16) -> np.ndarray:
    """Blobby random mask with a random density; never empty."""
    noise = ndimage.gaussian_filter(rng.normal(size=(size,) * 3), sigma=rng.uniform(0.5, 2.5))
    mask = noise > np.quantile(noise, rng.uniform(0.5, 0.97))
    if not mask.any():
        mask[tuple(rng.integers(0, size, 3))] = True
    return mask


def run_metric_suite(n_pairs: int = 200, size: int = 16, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    worst_dice = Fraction(0)
    worst_hd = 0.0
    for i in range(n_pairs):
        spacing = SPACINGS[i % len(SPACINGS)]
        a = random_mask(rng, size)
        b = random_mask(rng, size) if i % 10 else a.copy()
        ma, mb = BinaryMask(a, spacing), BinaryMask(b, spacing)
        worst_dice = max(worst_dice, abs(Fraction(dice(ma, mb)) - brute_dice(a, b)))
        worst_hd = max(worst_hd, abs(hd95(ma, mb) - brute_hd95(a, b, np.array(spacing))))
    ok = worst_dice < Fraction(1, 10**12) and worst_hd < 1e-9
    return {
        "suite": "metrics",
        "pass": ok,
        "failing": [] if ok else ["dice/hd95 oracle"],
        "pairs": n_pairs,
        "grid": size,
        "max_dice_err": float(worst_dice),
        "max_hd95_err_mm": worst_hd,
    }


def run_checks(suite: str = "all", seed: int = 0, inject_fault: bool = False, pairs: int = 200) -> dict:
    reports = []
    if suite in ("kernels", "all"):
        reports.append(run_kernel_suite(seed, inject_fault))
    if suite in ("metrics", "all"):
        reports.append(run_metric_suite(pairs, seed=seed))
    if not reports:
        raise ValueError(f"unknown suite {suite!r}")
    return {
        "schema_version": 1,
        "suite": suite,
        "pass": all(r["pass"] for r in reports),
        "failing": list(itertools.chain.from_iterable(r["failing"] for r in reports)),
        "reports": reports,
    }
