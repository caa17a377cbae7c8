"""Pure-Python twins of the compiled Gibbs-sweep kernels.

Same scan order, same uniform consumption, same libm exp as _kernels.pyx, so
chains are bit-identical across backends. These run orders of magnitude
slower and are selected only when the extension is missing (or forced via
CSMCI_PURE_PYTHON=1).
"""

from math import exp


def _p_minus(b: float) -> float:
    z = 2.0 * b
    if z > 0.0:
        e = exp(-z)
        return e / (1.0 + e)
    e = exp(z)
    return 1.0 / (1.0 + e)


def _sweep(state: list, h: list, indptr: list, targets: list, weights: list, u: list) -> None:
    for i in range(len(state)):
        b = h[i]
        for a in range(indptr[i], indptr[i + 1]):
            b += weights[a] * state[targets[a]]
        state[i] = -1.0 if u[i] < _p_minus(b) else 1.0


def run_sweeps_binary(state, h, indptr, targets, weights, uniforms):
    """Run uniforms.shape[0] full sweeps, mutating state in place."""
    s = state.tolist()
    hl, pl, tl, wl = h.tolist(), indptr.tolist(), targets.tolist(), weights.tolist()
    for u in uniforms.tolist():
        _sweep(s, hl, pl, tl, wl, u)
    state[:] = s


def run_sweeps_binary_ordered(state, h, indptr, targets, weights, uniforms, orders):
    """Sweeps with an explicit site-visit order per sweep (random-scan support)."""
    s = state.tolist()
    hl, pl, tl, wl = h.tolist(), indptr.tolist(), targets.tolist(), weights.tolist()
    for u, order in zip(uniforms.tolist(), orders.tolist()):
        for k, i in enumerate(order):
            b = hl[i]
            for a in range(pl[i], pl[i + 1]):
                b += wl[a] * s[tl[a]]
            s[i] = -1.0 if u[k] < _p_minus(b) else 1.0
    state[:] = s


def run_chain_binary(state, h, indptr, targets, weights, uniforms, out, interval):
    """Sweep and record: out[k] is the state after (k+1)*interval sweeps."""
    s = state.tolist()
    hl, pl, tl, wl = h.tolist(), indptr.tolist(), targets.tolist(), weights.tolist()
    rows = uniforms.tolist()
    for k in range(out.shape[0]):
        for t in range(interval):
            _sweep(s, hl, pl, tl, wl, rows[k * interval + t])
        out[k] = s
    state[:] = s


def advance_bank_binary(states, h, indptr, targets, weights, uniforms):
    """Advance every chain by uniforms.shape[1] sweeps (chain c uses uniforms[c])."""
    hl, pl, tl, wl = h.tolist(), indptr.tolist(), targets.tolist(), weights.tolist()
    for c in range(states.shape[0]):
        s = states[c].tolist()
        for u in uniforms[c].tolist():
            _sweep(s, hl, pl, tl, wl, u)
        states[c] = s
