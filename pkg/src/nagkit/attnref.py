"""Single-head causal attention kernels with graph-feature terms.

Three variants share one causal softmax:

* ``attn_masked``       softmax(Q K^T / sqrt(d_h) + M) V
* ``attn_additive_pe``  softmax(Q (K + D)^T / sqrt(d_h) + M) (V + D), D is (n, n, d_h)
* ``attn_reduced``      softmax(Q K^T / sqrt(d_h) + (Q U) . D2 / sqrt(d_h2) + M) V, D2 is (n, n, d_h2)

The additive variant is evaluated in its distributed form
(``Q K^T + Q D^T`` and ``P V + sum_j P_ij D_ij``) so neither ``K + D`` nor
``V + D`` is materialized.  Logit buffers are softmaxed in place.
"""

from __future__ import annotations

import time
import tracemalloc
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

MASK_VALUE = -1e9


def causal_mask(n: int, dtype=np.float64) -> np.ndarray:
    """Additive mask: 0 on and below the diagonal, ``MASK_VALUE`` above."""
    m = np.zeros((n, n), dtype=dtype)
    m[np.triu_indices(n, 1)] = MASK_VALUE
    return m


def _check_qkv(Q, K, V, M) -> int:
    if Q.ndim != 2 or K.shape != Q.shape or V.shape != Q.shape:
        raise ValueError(f"Q, K, V must share shape (n, d_h); got {Q.shape}, {K.shape}, {V.shape}")
    n = Q.shape[0]
    if M is not None and M.shape != (n, n):
        raise ValueError(f"mask shape {M.shape} != ({n}, {n})")
    for name, arr in (("Q", Q), ("K", K), ("V", V)):
        if np.isnan(arr).any():
            raise ValueError(f"NaN in {name}")
    return n


def _softmax_rows_(S: np.ndarray) -> np.ndarray:
    S -= S.max(axis=1, keepdims=True)
    np.exp(S, out=S)
    S /= S.sum(axis=1, keepdims=True)
    return S


def _logits_masked(Q, K, M) -> np.ndarray:
    S = Q @ K.T
    S /= np.sqrt(Q.shape[1])
    S += M
    return S


def logits_additive_pe(Q, K, D, M=None) -> np.ndarray:
    n, d_h = Q.shape
    if D.shape != (n, n, d_h):
        raise ValueError(f"D must be ({n}, {n}, {d_h}), got {D.shape}")
    S = Q @ K.T
    S += np.einsum("id,ijd->ij", Q, D)
    S /= np.sqrt(d_h)
    if M is not None:
        S += M
    return S


def logits_reduced(Q, K, U, D2, M=None) -> np.ndarray:
    n, d_h = Q.shape
    if U.ndim != 2 or U.shape[0] != d_h:
        raise ValueError(f"U must be ({d_h}, d_h2), got {U.shape}")
    d_h2 = U.shape[1]
    if D2.shape != (n, n, d_h2):
        raise ValueError(f"D2 must be ({n}, {n}, {d_h2}), got {D2.shape}")
    S = Q @ K.T
    S /= np.sqrt(d_h)
    S += np.einsum("ie,ije->ij", Q @ U, D2) / np.sqrt(d_h2)
    if M is not None:
        S += M
    return S


def attn_masked(Q, K, V, M=None) -> np.ndarray:
    n = _check_qkv(Q, K, V, M)
    M = causal_mask(n) if M is None else M
    P = _softmax_rows_(_logits_masked(Q, K, M))
    return P @ V


def attn_additive_pe(Q, K, V, D, M=None) -> np.ndarray:
    n = _check_qkv(Q, K, V, M)
    M = causal_mask(n) if M is None else M
    P = _softmax_rows_(logits_additive_pe(Q, K, D, M))
    out = P @ V
    out += np.einsum("ij,ijd->id", P, D)
    return out


def attn_reduced(Q, K, V, U, D2, M=None) -> np.ndarray:
    n = _check_qkv(Q, K, V, M)
    M = causal_mask(n) if M is None else M
    P = _softmax_rows_(logits_reduced(Q, K, U, D2, M))
    return P @ V


def attn_probs_reduced(Q, K, U, D2, M=None) -> np.ndarray:
    M = causal_mask(Q.shape[0]) if M is None else M
    return _softmax_rows_(logits_reduced(Q, K, U, D2, M))


def attn_reduced_grad(inputs: Mapping[str, np.ndarray], upstream: np.ndarray) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of ``attn_reduced`` w.r.t. Q, K, V, U and D2."""
    Q, K, V, U, D2 = (inputs[k] for k in ("Q", "K", "V", "U", "D2"))
    M = inputs.get("M")
    n, d_h = Q.shape
    if upstream.shape != (n, d_h):
        raise ValueError(f"upstream must be ({n}, {d_h}), got {upstream.shape}")
    d_h2 = U.shape[1]
    a, b = 1 / np.sqrt(d_h), 1 / np.sqrt(d_h2)
    A = Q @ U
    P = attn_probs_reduced(Q, K, U, D2, M)

    dV = P.T @ upstream
    dP = upstream @ V.T
    dS = P * (dP - (dP * P).sum(axis=1, keepdims=True))
    dA = np.einsum("ij,ije->ie", dS, D2) * b
    return {
        "Q": a * (dS @ K) + dA @ U.T,
        "K": a * (dS.T @ Q),
        "V": dV,
        "U": Q.T @ dA,
        "D2": b * dS[:, :, None] * A[:, None, :],
    }


_GRADIENTS: dict[Callable, Callable] = {attn_reduced: attn_reduced_grad}


def fd_check(op: Callable, inputs: Mapping[str, np.ndarray], h: float = 1e-6, *,
             grad: Callable | None = None, upstream: np.ndarray | None = None,
             wrt: tuple[str, ...] | None = None, seed: int = 0) -> float:
    """Largest ``|analytic - numeric| / max(1, |numeric|)`` over every perturbed entry.

    The scalar probed is ``sum(upstream * op(**inputs))``; ``upstream``
    defaults to a seeded standard-normal matrix.  ``wrt`` restricts the check
    to some inputs (default: every input the gradient function returns).
    """
    grad = grad or _GRADIENTS[op]
    inputs = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    out = op(**inputs)
    if upstream is None:
        upstream = np.random.default_rng(seed).standard_normal(out.shape)
    analytic = grad(inputs, upstream)
    names = wrt or tuple(analytic)
    worst = 0.0
    for name in names:
        x = inputs[name]
        g = analytic[name]
        for idx in np.ndindex(x.shape):
            orig = x[idx]
            x[idx] = orig + h
            plus = op(**inputs)
            x[idx] = orig - h
            minus = op(**inputs)
            x[idx] = orig
            # difference before reducing: untouched entries cancel exactly
            numeric = float(np.sum(upstream * (plus - minus))) / (2 * h)
            worst = max(worst, abs(g[idx] - numeric) / max(1.0, abs(numeric)))
    return worst


@dataclass(frozen=True)
class MemoryRow:
    variant: str
    n: int
    d_h: int
    d_h2: int
    analytic_bytes: int
    measured_bytes: int
    wall_ms: float

    def csv(self) -> str:
        return (f"{self.variant},{self.n},{self.d_h},{self.d_h2},"
                f"{self.analytic_bytes},{self.measured_bytes},{self.wall_ms:.3f}")


CSV_HEADER = "variant,n,d_h,d_h2,analytic_bytes,measured_bytes,wall_ms"


def analytic_elements(variant: str, n: int, d_h: int, d_h2: int) -> int:
    """Dominant auxiliary term (elements) of each variant."""
    return {"masked": n * n, "additive_pe": n * n * d_h, "reduced": n * n * d_h2}[variant]


def _measure(fn: Callable[[], object]) -> tuple[int, float]:
    tracemalloc.start()
    tracemalloc.reset_peak()
    base = tracemalloc.get_traced_memory()[0]
    t0 = time.perf_counter()
    result = fn()
    wall = (time.perf_counter() - t0) * 1e3
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    del result
    return peak - base, wall


def memory_report(n: int, d_h: int, d_h2: int, seed: int = 0, d_max: int = 15) -> list[MemoryRow]:
    """Analytic and measured peak auxiliary bytes for the three variants.

    The measured figure is the tracemalloc high-water mark of one forward
    pass, including materialization of the variant's time-varying feature
    tensor from per-step lookup codes (width ``d_h`` for the additive
    variant, ``d_h2`` for the reduced one).  Q, K, V, U, the mask, the codes
    and the embedding tables are prepared beforehand and not counted.
    """
    from nagkit.stepfeat import pack_codes

    if min(n, d_h, d_h2) < 1:
        raise ValueError("sizes must be positive")
    rng = np.random.default_rng(seed)
    Q, K, V = (rng.standard_normal((n, d_h)) for _ in range(3))
    U = rng.standard_normal((d_h, d_h2))
    M = causal_mask(n)
    deg_codes = rng.integers(0, d_max, size=(n, n), dtype=np.uint8)
    spd_codes = rng.integers(0, d_max + 2, size=(n, n), dtype=np.uint8)
    tables = {
        w: (rng.standard_normal((d_max, w)), rng.standard_normal((d_max + 2, w)))
        for w in {d_h, d_h2}
    }

    runs = {
        "masked": lambda: attn_masked(Q, K, V, M),
        "additive_pe": lambda: attn_additive_pe(Q, K, V, pack_codes(deg_codes, spd_codes, *tables[d_h]), M),
        "reduced": lambda: attn_reduced(Q, K, V, U, pack_codes(deg_codes, spd_codes, *tables[d_h2]), M),
    }
    rows = []
    for variant, fn in runs.items():
        measured, wall = _measure(fn)
        rows.append(MemoryRow(variant, n, d_h, d_h2, 8 * analytic_elements(variant, n, d_h, d_h2), measured, wall))
    return rows
