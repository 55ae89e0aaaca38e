import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarfog.metrics import (
    SATURATION_EPS,
    UndefinedMetricError,
    evaluate,
    metric_ag,
    metric_e,
    metric_rbar,
    metric_sd,
    metric_sigma,
    sobel_magnitude,
    visible_edges,
)


# -- pixel-loop oracle ----------------------------------------------------------------


def px(img, r, c):
    rows, cols = img.shape
    return img[min(max(r, 0), rows - 1), min(max(c, 0), cols - 1)]


def sobel_loop(img):
    rows, cols = img.shape
    out = np.zeros_like(img)
    for r in range(rows):
        for c in range(cols):
            gx = gy = 0.0
            for d, w in ((-1, 1.0), (0, 2.0), (1, 1.0)):
                gx += w * (px(img, r + d, c + 1) - px(img, r + d, c - 1))
                gy += w * (px(img, r + 1, c + d) - px(img, r - 1, c + d))
            out[r, c] = math.sqrt(gx * gx + gy * gy) / 8.0
    return out


def edges_loop(img, thr):
    g = sobel_loop(img)
    rng = img.max() - img.min()
    return [[g[r, c] >= thr * rng and g[r, c] > 0 for c in range(img.shape[1])] for r in range(img.shape[0])], g


def oracle(orig, rest, thr=0.05):
    eo, go = edges_loop(orig, thr)
    er, gr = edges_loop(rest, thr)
    n_o = sum(map(sum, eo))
    n_r = sum(map(sum, er))
    logs = [math.log(gr[r, c] / go[r, c]) for r in range(orig.shape[0]) for c in range(orig.shape[1])
            if er[r][c] and go[r, c] >= 1e-9]
    sat = lambda v: v <= SATURATION_EPS or v >= 1 - SATURATION_EPS
    n_s = sum(1 for v, w in zip(orig.ravel(), rest.ravel()) if sat(w) and not sat(v))
    vals = rest.ravel().tolist()
    mean = sum(vals) / len(vals)
    sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals)) * 255
    ag_terms = []
    for r in range(rest.shape[0] - 1):
        for c in range(rest.shape[1] - 1):
            dx = rest[r, c + 1] - rest[r, c]
            dy = rest[r + 1, c] - rest[r, c]
            ag_terms.append(math.sqrt((dx * dx + dy * dy) / 2))
    return dict(e=(n_r - n_o) / n_o, r_bar=math.exp(sum(logs) / len(logs)), sigma=n_s / rest.size,
                sd=sd, ag=255 * sum(ag_terms) / len(ag_terms), n_o=n_o, n_r=n_r, n_s=n_s)


def test_sobel_matches_loop(rng):
    img = rng.random((9, 13))
    np.testing.assert_allclose(sobel_magnitude(img), sobel_loop(img), rtol=0, atol=1e-14)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_evaluate_matches_oracle(seed):
    r = np.random.default_rng(seed)
    orig = np.clip(r.random((16, 16)) * 0.6 + 0.2, 0, 1)
    rest = np.clip((orig - 0.5) * 2.2 + 0.5 + 0.05 * r.standard_normal((16, 16)), 0, 1)
    got = evaluate(orig, rest).as_dict()
    want = oracle(orig, rest)
    for key, val in want.items():
        assert got[key] == pytest.approx(val, rel=1e-12, abs=1e-12), key


# -- hand-computed values -------------------------------------------------------------


def test_step_edge_count():
    img = np.zeros((10, 10))
    img[:, 5:] = 1.0
    edges = visible_edges(img)
    # columns 4 and 5 respond with gradient 1/2, everything else is flat
    assert edges.count == 20
    assert np.all(edges.mask[:, 4]) and np.all(edges.mask[:, 5])
    assert sobel_magnitude(img)[3, 4] == pytest.approx(0.5)


def test_contrast_doubling():
    orig = np.zeros((10, 10))
    orig[:, 5:] = 0.25
    rest = orig * 2 + 0.1
    assert metric_e(orig, rest) == 0.0
    assert metric_rbar(orig, rest) == pytest.approx(2.0, rel=1e-12)


def test_sd_and_ag_hand_values():
    img = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert metric_sd(img) == pytest.approx(127.5)
    # one pixel: dx = 1, dy = 1 -> sqrt(1) = 1
    assert metric_ag(img) == pytest.approx(255.0)
    assert metric_ag(np.zeros((1, 5))) == 0.0


def test_sigma_hand_value():
    orig = np.full((4, 5), 0.5)
    rest = orig.copy()
    rest[0, :3] = 1.0
    rest[1, 0] = 0.0
    assert metric_sigma(orig, rest) == pytest.approx(4 / 20)
    # already-saturated original pixels do not count
    orig[0, 0] = 1.0
    assert metric_sigma(orig, rest) == pytest.approx(3 / 20)


# -- undefined and invalid inputs -----------------------------------------------------


def test_flat_original_undefined():
    flat = np.full((8, 8), 0.3)
    step = np.zeros((8, 8))
    step[:, 4:] = 1
    with pytest.raises(UndefinedMetricError):
        metric_e(flat, step)
    with pytest.raises(UndefinedMetricError):
        metric_rbar(flat, step)
    rep = evaluate(flat, step)
    assert math.isnan(rep.e) and math.isnan(rep.r_bar) and rep.n_o == 0 and rep.n_r == 16


def test_negative_threshold():
    img = np.zeros((4, 4))
    for fn in (lambda: visible_edges(img, -0.1), lambda: metric_rbar(img, img, -1),
               lambda: evaluate(img, img, -0.01)):
        with pytest.raises(ValueError):
            fn()


def test_threshold_zero_counts_nonzero_gradients(rng):
    img = rng.random((12, 12))
    assert visible_edges(img, 0.0).count == np.count_nonzero(sobel_magnitude(img) > 0)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        metric_e(np.zeros((4, 4)), np.zeros((4, 5)))


# -- invariants -----------------------------------------------------------------------


def test_identity(rng):
    img = rng.random((20, 20))
    rep = evaluate(img, img)
    assert rep.e == 0 and rep.r_bar == pytest.approx(1.0, rel=1e-14) and rep.sigma == 0


@given(seed=st.integers(0, 10_000), alpha=st.floats(0.1, 4.0), offset=st.floats(-1.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_rbar_scales_with_affine_gain(seed, alpha, offset):
    orig = np.random.default_rng(seed).random((12, 12))
    rest = alpha * orig + offset
    assert metric_rbar(orig, rest) == pytest.approx(alpha, rel=1e-9)
    assert metric_e(orig, rest) == 0.0


@given(seed=st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_e_antisymmetry_and_transpose(seed):
    r = np.random.default_rng(seed)
    a, b = r.random((10, 14)), r.random((10, 14)) ** 3
    na, nb = visible_edges(a).count, visible_edges(b).count
    assert metric_e(a, b) * na == pytest.approx(-metric_e(b, a) * nb)
    assert metric_e(a.T, b.T) == pytest.approx(metric_e(a, b))
    assert metric_rbar(a.T, b.T) == pytest.approx(metric_rbar(a, b), rel=1e-12)


@given(seed=st.integers(0, 10_000), k=st.integers(0, 30))
@settings(max_examples=40, deadline=None)
def test_sigma_monotone_in_clipping(seed, k):
    r = np.random.default_rng(seed)
    orig = r.random((8, 8)) * 0.8 + 0.1
    rest = orig.copy()
    flat = rest.ravel()
    flat[:k] = 1.0
    less = metric_sigma(orig, rest)
    flat[k:k + 3] = 0.0
    assert metric_sigma(orig, rest) >= less
    assert less == pytest.approx(k / 64)
