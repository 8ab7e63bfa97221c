# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled step loop for the asymmetric first-order pressure plant.

Semantics must stay bit-identical to ``_plant_core_py.step_sequence``:
same IEEE double operations in the same order (the build disables FP
contraction for this reason).
"""


def step_sequence(double pressure, double[::1] commands, double tau_up,
                  double tau_down, double max_pressure, double dt,
                  double[::1] out):
    """Advance one channel through ``commands``, writing each new pressure
    into ``out``. Returns the final pressure."""
    cdef Py_ssize_t i
    cdef Py_ssize_t n = commands.shape[0]
    cdef double cmd, tau, alpha
    cdef double p = pressure
    for i in range(n):
        cmd = commands[i]
        if cmd < 0.0:
            cmd = 0.0
        elif cmd > max_pressure:
            cmd = max_pressure
        tau = tau_up if cmd > p else tau_down
        alpha = dt / tau
        if alpha > 1.0:
            alpha = 1.0
        p = p + alpha * (cmd - p)
        out[i] = p
    return p
