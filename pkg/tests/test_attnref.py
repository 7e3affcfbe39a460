from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nagkit.attnref import (
    CSV_HEADER,
    MASK_VALUE,
    analytic_elements,
    attn_additive_pe,
    attn_masked,
    attn_probs_reduced,
    attn_reduced,
    attn_reduced_grad,
    causal_mask,
    fd_check,
    logits_additive_pe,
    logits_reduced,
    memory_report,
)


def make(n=6, d_h=8, d_h2=3, seed=0):
    rng = np.random.default_rng(seed)
    return {
        "Q": rng.standard_normal((n, d_h)),
        "K": rng.standard_normal((n, d_h)),
        "V": rng.standard_normal((n, d_h)),
        "U": rng.standard_normal((d_h, d_h2)),
        "D2": rng.standard_normal((n, n, d_h2)),
        "D": rng.standard_normal((n, n, d_h)),
    }


def loop_attention(Q, K, V, D=None, bias=None, value_d=False):
    """Naive per-element oracle; ``bias[i][j]`` is added to logit (i, j)."""
    n, d_h = Q.shape
    out = np.zeros((n, d_h))
    logits = np.zeros((n, n))
    for i in range(n):
        row = []
        for j in range(i + 1):
            s = 0.0
            for d in range(d_h):
                kd = K[j, d] + (D[i, j, d] if D is not None else 0.0)
                s += Q[i, d] * kd
            s /= math.sqrt(d_h)
            if bias is not None:
                s += bias[i][j]
            row.append(s)
            logits[i, j] = s
        top = max(row)
        w = [math.exp(s - top) for s in row]
        z = sum(w)
        for j in range(i + 1):
            p = w[j] / z
            for d in range(d_h):
                v = V[j, d] + (D[i, j, d] if value_d and D is not None else 0.0)
                out[i, d] += p * v
    return out, logits


def test_mask_shape():
    m = causal_mask(4)
    assert (m[np.tril_indices(4)] == 0).all() and (m[np.triu_indices(4, 1)] == MASK_VALUE).all()


def test_single_row_is_value():
    t = make(n=1)
    np.testing.assert_array_equal(attn_masked(t["Q"], t["K"], t["V"]), t["V"])
    delta = t["D"]
    out = attn_additive_pe(t["Q"], t["K"], t["V"], delta)
    np.testing.assert_allclose(out, t["V"] + delta[0], rtol=0, atol=1e-15)


def test_zero_keys_give_running_mean():
    t = make(n=7)
    out = attn_masked(t["Q"], np.zeros_like(t["K"]), t["V"])
    want = np.cumsum(t["V"], axis=0) / np.arange(1, 8)[:, None]
    np.testing.assert_allclose(out, want, atol=1e-14)


def test_zero_features_degenerate_to_masked():
    t = make()
    base = attn_masked(t["Q"], t["K"], t["V"])
    assert np.array_equal(attn_additive_pe(t["Q"], t["K"], t["V"], np.zeros_like(t["D"])), base)
    assert np.array_equal(attn_reduced(t["Q"], t["K"], t["V"], t["U"], np.zeros_like(t["D2"])), base)


@pytest.mark.parametrize("n", [1, 2, 5, 17, 32])
def test_matches_loop_oracle(n):
    t = make(n=n, d_h=6, d_h2=3, seed=n)
    out, _ = loop_attention(t["Q"], t["K"], t["V"])
    np.testing.assert_allclose(attn_masked(t["Q"], t["K"], t["V"]), out, rtol=0, atol=1e-13)
    out, _ = loop_attention(t["Q"], t["K"], t["V"], D=t["D"], value_d=True)
    np.testing.assert_allclose(attn_additive_pe(t["Q"], t["K"], t["V"], t["D"]), out, rtol=0, atol=1e-13)
    A = t["Q"] @ t["U"]
    bias = np.einsum("ie,ije->ij", A, t["D2"]) / math.sqrt(3)
    out, _ = loop_attention(t["Q"], t["K"], t["V"], bias=bias)
    np.testing.assert_allclose(attn_reduced(t["Q"], t["K"], t["V"], t["U"], t["D2"]), out, rtol=0, atol=1e-13)


def test_reduced_logits_equal_additive_when_u_is_identity():
    for n in (1, 8, 64):
        t = make(n=n, d_h=16, d_h2=16, seed=n)
        a = logits_additive_pe(t["Q"], t["K"], t["D"])
        b = logits_reduced(t["Q"], t["K"], np.eye(16), t["D"])
        assert np.abs(a - b).max() <= 1e-12
        _, oracle = loop_attention(t["Q"], t["K"], t["V"], D=t["D"])
        tri = np.tril_indices(n)
        assert np.abs(a[tri] - oracle[tri]).max() <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31))
def test_causality(n, seed):
    t = make(n=n, seed=seed)
    i = seed % n
    rng = np.random.default_rng(seed + 1)
    p = {k: v.copy() for k, v in t.items()}
    for k in ("Q", "K", "V"):
        p[k][i + 1:] = rng.standard_normal(p[k][i + 1:].shape)
    for k in ("D", "D2"):
        p[k][i + 1:] = rng.standard_normal(p[k][i + 1:].shape)
        p[k][:, i + 1:] = rng.standard_normal(p[k][:, i + 1:].shape)
    pairs = [
        (attn_masked(t["Q"], t["K"], t["V"]), attn_masked(p["Q"], p["K"], p["V"])),
        (attn_additive_pe(t["Q"], t["K"], t["V"], t["D"]), attn_additive_pe(p["Q"], p["K"], p["V"], p["D"])),
        (attn_reduced(t["Q"], t["K"], t["V"], t["U"], t["D2"]),
         attn_reduced(p["Q"], p["K"], p["V"], p["U"], p["D2"])),
    ]
    for a, b in pairs:
        assert np.array_equal(a[: i + 1], b[: i + 1])


def test_softmax_rows_sum_to_one():
    t = make(n=20)
    P = attn_probs_reduced(t["Q"], t["K"], t["U"], t["D2"])
    assert np.abs(P.sum(axis=1) - 1).max() <= 1e-12
    assert not P[np.triu_indices(20, 1)].any()


def test_input_errors():
    t = make()
    with pytest.raises(ValueError):
        attn_masked(t["Q"], t["K"][:-1], t["V"])
    bad = t["Q"].copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError, match="NaN"):
        attn_masked(bad, t["K"], t["V"])
    with pytest.raises(ValueError):
        attn_additive_pe(t["Q"], t["K"], t["V"], t["D2"])
    with pytest.raises(ValueError):
        attn_reduced(t["Q"], t["K"], t["V"], t["U"].T, t["D2"])
    with pytest.raises(ValueError):
        attn_reduced_grad({k: t[k] for k in ("Q", "K", "V", "U", "D2")}, np.zeros((2, 2)))


def reduced_inputs(n=8, d_h=16, d_h2=4, seed=0):
    t = make(n, d_h, d_h2, seed)
    return {k: t[k] for k in ("Q", "K", "V", "U", "D2")}


def test_gradient_fd_at_stated_size():
    assert fd_check(attn_reduced, reduced_inputs(), h=1e-6) <= 1e-5


def test_value_path_fd_tight():
    assert fd_check(attn_reduced, reduced_inputs(seed=3), h=1e-6, wrt=("V",)) <= 1e-9


def test_fd_error_grows_with_large_step():
    x = reduced_inputs(n=5, d_h=6, d_h2=2, seed=2)
    assert fd_check(attn_reduced, x, h=1e-2) > fd_check(attn_reduced, x, h=1e-6)


def test_zero_upstream_and_value_gradient():
    x = reduced_inputs(seed=4)
    g = attn_reduced_grad(x, np.zeros((8, 16)))
    assert all(not v.any() for v in g.values())
    up = np.random.default_rng(0).standard_normal((8, 16))
    g = attn_reduced_grad(x, up)
    P = attn_probs_reduced(x["Q"], x["K"], x["U"], x["D2"])
    np.testing.assert_allclose(g["V"], P.T @ up, atol=1e-15)
    assert g["D2"].shape == x["D2"].shape and g["U"].shape == x["U"].shape


def test_analytic_memory_ratio():
    assert analytic_elements("additive_pe", 256, 32, 4) / analytic_elements("reduced", 256, 32, 4) == 8
    assert analytic_elements("masked", 10, 4, 2) == 100


def test_memory_report_rows():
    rows = memory_report(64, 16, 2)
    assert [r.variant for r in rows] == ["masked", "additive_pe", "reduced"]
    assert all(r.measured_bytes > 0 for r in rows)
    assert CSV_HEADER.count(",") == rows[0].csv().count(",")
    small = memory_report(1, 16, 2)
    sizes = [r.measured_bytes for r in small]
    assert max(sizes) - min(sizes) < 4096
    with pytest.raises(ValueError):
        memory_report(0, 4, 2)
