"""Independent reference implementations used as test oracles.

Everything here is deliberately written with scalar loops and plain
math, sharing no code with the library, so that agreement between the
two routes is meaningful.
"""

import math

import numpy as np

from minimt.tensor import Graph, backward


def matmul_loops(a, b):
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def sigmoid_scalar(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def gru_scalar(params, x, h):
    """One GRU step with explicit loops. params maps wz,uz,bz,... to arrays."""
    d_in = len(x)
    d_h = len(h)

    def affine(w, u, b):
        out = []
        for j in range(d_h):
            s = b[j]
            for i in range(d_in):
                s += x[i] * w[i, j]
            for i in range(d_h):
                s += u[i, j] * affine_h[i]
            out.append(s)
        return out

    # z and r read h directly; the candidate reads r*h.
    affine_h = list(h)
    z = [sigmoid_scalar(v) for v in affine(params["wz"], params["uz"], params["bz"])]
    r = [sigmoid_scalar(v) for v in affine(params["wr"], params["ur"], params["br"])]
    affine_h = [r[i] * h[i] for i in range(d_h)]
    hbar = [math.tanh(v) for v in affine(params["wh"], params["uh"], params["bh"])]
    return [(1.0 - z[j]) * h[j] + z[j] * hbar[j] for j in range(d_h)]


def softmax_scalar(xs):
    m = max(xs)
    es = [math.exp(v - m) for v in xs]
    z = sum(es)
    return [e / z for e in es]


def attention_scalar(wa, ua, va, s, annotations):
    """Additive attention with loops: scores, softmax, weighted sum."""
    d_a = wa.shape[1]
    scores = []
    for ann in annotations:
        pre = []
        for j in range(d_a):
            v = 0.0
            for i in range(len(s)):
                v += s[i] * wa[i, j]
            for i in range(len(ann)):
                v += ann[i] * ua[i, j]
            pre.append(math.tanh(v))
        scores.append(sum(pre[j] * va[j] for j in range(d_a)))
    weights = softmax_scalar(scores)
    ctx = [0.0] * len(annotations[0])
    for w, ann in zip(weights, annotations):
        for i in range(len(ann)):
            ctx[i] += w * ann[i]
    return ctx, weights


def finite_diff_grads(loss_fn, params, h=1e-5):
    """Central finite differences of loss_fn() w.r.t. every entry of the
    given Tensor parameters. loss_fn must re-run the forward pass from
    the parameters' current data."""
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def analytic_grads(loss_builder, params):
    """Run loss_builder() on a fresh graph, backprop, and return a copy of
    every parameter gradient."""
    for p in params.values():
        p.zero_grad()
    with Graph() as g:
        loss = loss_builder()
    backward(g, loss)
    return {name: p.grad.copy() for name, p in params.items()}


def max_rel_error(analytic, numeric, floor=1e-4, abs_ok=1e-8):
    """Worst relative disagreement; tiny absolute differences pass even
    when both values are near zero (finite-difference noise floor)."""
    worst = 0.0
    for name in analytic:
        a = analytic[name].reshape(-1)
        f = numeric[name].reshape(-1)
        for x, y in zip(a, f):
            diff = abs(x - y)
            if diff < abs_ok:
                continue
            rel = diff / max(abs(x), abs(y), floor)
            worst = max(worst, rel)
    return worst
