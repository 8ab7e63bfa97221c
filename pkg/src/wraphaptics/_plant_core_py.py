"""Pure-Python fallback for the plant step loop.

Mirrors ``_plant_core.pyx`` operation for operation so both backends
produce bit-identical trajectories.
"""


def step_sequence(pressure, commands, tau_up, tau_down, max_pressure, dt, out):
    """Advance one channel through ``commands``, writing each new pressure
    into ``out``. Returns the final pressure."""
    p = float(pressure)
    for i in range(len(commands)):
        cmd = float(commands[i])
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
