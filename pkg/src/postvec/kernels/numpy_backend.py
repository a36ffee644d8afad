"""Pure-NumPy GRU sequence kernels (reference backend).

Both backends implement the same two entry points over a right-padded
batch. Shapes: B examples, T padded steps, H hidden units. ``xp`` holds
the precomputed input projections plus biases for the three gates in the
fixed slice order reset | update | candidate, i.e.

    xp[:, t, 0H:1H] = x_t @ W_r.T + b_r
    xp[:, t, 1H:2H] = x_t @ W_z.T + b_z
    xp[:, t, 2H:3H] = x_t @ W_h.T + b_h

One step of the recurrence, given the previous state ``hp``:

    r = sigma(xp_r + hp @ U_r.T)
    z = sigma(xp_z + hp @ U_z.T)
    c = tanh(xp_h + (r * hp) @ U_h.T)
    h = (1 - z) * hp + z * c

``mask`` is 1.0 at real steps and 0.0 at padded ones; a masked step
carries the state through unchanged (h = hp), so the last slot of the
state sequence always holds the final state of the unpadded sequence.
Gate values are computed (and cached) at masked steps too, which keeps
the two backends bit-comparable, but they never influence the state or
the gradients.

The backward pass consumes the forward caches and the gradient w.r.t.
the final state only (no per-step upstream gradients exist in this
model). It returns gradients for the input projections, the three
recurrent matrices, and the initial state.
"""

from __future__ import annotations

import numpy as np


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gru_forward(xp: np.ndarray, u_r: np.ndarray, u_z: np.ndarray, u_h: np.ndarray,
                mask: np.ndarray):
    """Run the recurrence over all steps.

    Returns ``(h, r, z, c)``, each of shape (B, T, H); ``h[:, t]`` is the
    state after step t with padding frozen.
    """
    batch, steps, three_h = xp.shape
    hidden = three_h // 3
    h = np.empty((batch, steps, hidden))
    r_all = np.empty((batch, steps, hidden))
    z_all = np.empty((batch, steps, hidden))
    c_all = np.empty((batch, steps, hidden))

    hp = np.zeros((batch, hidden))
    for t in range(steps):
        r = _stable_sigmoid(xp[:, t, :hidden] + hp @ u_r.T)
        z = _stable_sigmoid(xp[:, t, hidden:2 * hidden] + hp @ u_z.T)
        c = np.tanh(xp[:, t, 2 * hidden:] + (r * hp) @ u_h.T)
        m = mask[:, t:t + 1]
        hp = m * ((1.0 - z) * hp + z * c) + (1.0 - m) * hp
        h[:, t] = hp
        r_all[:, t] = r
        z_all[:, t] = z
        c_all[:, t] = c
    return h, r_all, z_all, c_all


def gru_backward(d_final: np.ndarray, h: np.ndarray, r: np.ndarray, z: np.ndarray,
                 c: np.ndarray, u_r: np.ndarray, u_z: np.ndarray, u_h: np.ndarray,
                 mask: np.ndarray):
    """Backpropagate through time.

    ``d_final`` is the (B, H) gradient w.r.t. the state after the last
    step. Returns ``(dxp, du_r, du_z, du_h, dh0)``.
    """
    batch, steps, hidden = h.shape
    dxp = np.zeros((batch, steps, 3 * hidden))
    du_r = np.zeros_like(u_r)
    du_z = np.zeros_like(u_z)
    du_h = np.zeros_like(u_h)

    dh = d_final.copy()
    for t in range(steps - 1, -1, -1):
        hp = h[:, t - 1] if t > 0 else np.zeros((batch, hidden))
        m = mask[:, t:t + 1]
        rt, zt, ct = r[:, t], z[:, t], c[:, t]

        dc = dh * zt
        dz = dh * (ct - hp)
        da_c = m * (dc * (1.0 - ct * ct))
        da_z = m * (dz * zt * (1.0 - zt))

        drhp = da_c @ u_h
        da_r = drhp * hp * rt * (1.0 - rt)

        # masked rows: state passed through, so the gradient does too
        dhp = m * (dh * (1.0 - zt)) + (1.0 - m) * dh
        dhp += drhp * rt + da_r @ u_r + da_z @ u_z

        rhp = rt * hp
        du_r += da_r.T @ hp
        du_z += da_z.T @ hp
        du_h += da_c.T @ rhp

        dxp[:, t, :hidden] = da_r
        dxp[:, t, hidden:2 * hidden] = da_z
        dxp[:, t, 2 * hidden:] = da_c
        dh = dhp
    return dxp, du_r, du_z, du_h, dh
