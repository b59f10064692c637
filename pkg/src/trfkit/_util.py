"""Small internal helpers."""

import math


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves toward +infinity.

    Used for every seconds-to-samples conversion in the package so that
    all grids agree on the same convention. floor(x + 0.5) is exact for
    the half-integer boundary and locale/platform independent.
    """
    return math.floor(x + 0.5)
