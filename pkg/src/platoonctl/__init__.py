"""Two-layer robust motion control for autonomous platoons.

The package splits into a longitudinal coordination layer (delay-robust
feedback gains synthesized and certified through linear matrix inequalities)
and a per-vehicle motion-planning layer (quadratic-program MPC with obstacle
potential fields), plus a deterministic scenario simulator and a CLI.
"""

__version__ = "0.1.0"
