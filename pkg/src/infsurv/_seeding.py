"""Seed derivation for reproducible per-task random streams.

``derive_seed(root, i)`` applies the splitmix64 finaliser to
``root + (i + 1) * 0x9E3779B97F4A7C15`` (mod 2**64).  Every tree, test point
or repetition gets its own stream this way, so results never depend on the
order in which tasks run.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(root: int, index: int) -> int:
    return splitmix64((int(root) + (int(index) + 1) * GOLDEN) & MASK64)
