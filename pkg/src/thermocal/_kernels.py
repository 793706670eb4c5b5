"""Compiled inner loops for the wall-node update.

The calibration sampler evaluates the forward model on the order of 1e5
times per run, so the per-step recursion is jitted.  Both the public
scalar `step` and the full trajectory loop call `step_exact`, which keeps
the two paths bit-identical.
"""

import math

from numba import njit


@njit(cache=True)
def step_exact(t_wall, t_ext, t_set, h_ext, gain_fixed, gain_albedo,
               theta1, theta2, theta3, h_wa_base, h_tb_base, h_vent,
               c_wall, a_w, dt):
    # Exact solution of the linear wall ODE over one record of constant
    # forcing; unconditionally stable for any dt.
    h_wa = theta3 * h_wa_base
    q_solar = gain_fixed + theta1 * gain_albedo
    b = h_ext + h_wa
    t_eq = (h_ext * t_ext + h_wa * t_set + a_w * q_solar) / b
    t_new = t_eq + (t_wall - t_eq) * math.exp(-b * dt / c_wall)
    power = (h_wa * (t_set - t_new)
             + (h_vent + theta2 * h_tb_base) * (t_set - t_ext)
             - (1.0 - a_w) * q_solar)
    if power < 0.0:
        power = 0.0
    return t_new, power


@njit(cache=True)
def simulate_loop(t_wall0, dt, t_ext, t_set, h_ext, gain_fixed, gain_albedo,
                  theta1, theta2, theta3, h_wa_base, h_tb_base, h_vent,
                  c_wall, a_w, out):
    t_wall = t_wall0
    for k in range(out.shape[0]):
        t_wall, p = step_exact(t_wall, t_ext[k], t_set[k], h_ext[k],
                               gain_fixed[k], gain_albedo[k],
                               theta1, theta2, theta3,
                               h_wa_base, h_tb_base, h_vent,
                               c_wall, a_w, dt)
        out[k] = p
    return t_wall
