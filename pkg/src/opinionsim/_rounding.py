from __future__ import annotations

import math

# Relative slack so that 0.4 * 0.95 * 20000 == 7599.999... still rounds to 7600.
_SLACK = 1e-9


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves going up, tolerant of float noise."""
    return math.floor(x + 0.5 + _SLACK * max(1.0, abs(x)))


def expert_counts(mu: float, delta: float, n: int) -> tuple[int, int]:
    """Sizes (|E1|, |E0|) of a strong adversary's expert sets on n vertices.

    |E1| uses the same rounding as the I block of the counterexample; E0 takes
    whatever remains of round(mu * n).
    """
    total = round_half_up(mu * n)
    e1 = min(total, round_half_up((0.5 + delta) * mu * n))
    return e1, total - e1
