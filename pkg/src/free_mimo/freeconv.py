"""Marchenko-Pastur law and moment-space free (de)convolution.

All transforms are written with plain arithmetic on sequences so they work
with floats as well as :class:`fractions.Fraction` values. Lists are
returned; ``out[k-1]`` is the ``k``-th moment.

Multiplicative convolution with the Marchenko-Pastur law of ratio ``c``
satisfies, for every order ``k``,

    M_k = sum over non-crossing partitions pi of {1..k} of
          c^(|pi| - 1) * prod_{V in pi} m_|V|

which reduces to the familiar closed forms for ``k <= 4``. Orders 5..8 use
the enumeration directly.
"""

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import comb, pi, prod, sqrt

MAX_ORDER = 8


@dataclass(frozen=True)
class MPLaw:
    """Marchenko-Pastur law with ratio ``c`` (rows over columns)."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")

    @property
    def lower_edge(self):
        return (1 - sqrt(self.c)) ** 2

    @property
    def upper_edge(self):
        return (1 + sqrt(self.c)) ** 2

    @property
    def atom_mass(self):
        """Point mass at zero, ``(1 - 1/c)^+``."""
        return max(0.0, 1 - 1 / self.c)

    def density(self, x):
        return mp_density(self.c, x)

    def moments(self, order):
        return mp_moments(self.c, order)


def mp_density(c, x):
    """Density of the continuous part of the Marchenko-Pastur law.

    The atom at zero is not included; see :attr:`MPLaw.atom_mass`.
    """
    if x <= 0:
        return 0.0
    a = (1 - sqrt(c)) ** 2
    b = (1 + sqrt(c)) ** 2
    return sqrt(max(x - a, 0.0) * max(b - x, 0.0)) / (2 * pi * c * x)


def _set_partitions(k):
    """All set partitions of ``range(k)`` as lists of blocks."""
    if k == 0:
        yield []
        return
    for part in _set_partitions(k - 1):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [k - 1]] + part[i + 1:]
        yield part + [[k - 1]]


def _is_noncrossing(blocks):
    label = {}
    for idx, block in enumerate(blocks):
        for e in block:
            label[e] = idx
    k = len(label)
    for a in range(k):
        for b in range(a + 1, k):
            if label[a] != label[b]:
                continue
            for c in range(a + 1, b):
                if label[c] == label[a]:
                    continue
                for d in range(b + 1, k):
                    if label[d] == label[c]:
                        return False
    return True


@lru_cache(maxsize=None)
def noncrossing_block_types(k):
    """Count non-crossing partitions of ``{1..k}`` by sorted block sizes.

    Returns a tuple of ``(block_sizes, multiplicity)`` pairs; the
    multiplicities add up to the Catalan number ``C_k``.
    """
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"order must be in 1..{MAX_ORDER}")
    counts = Counter()
    for blocks in _set_partitions(k):
        if _is_noncrossing(blocks):
            counts[tuple(sorted(len(b) for b in blocks))] += 1
    return tuple(sorted(counts.items()))


def _mp_closed_form(c, k):
    return (1, c + 1, c * c + 3 * c + 1, c ** 3 + 6 * c * c + 6 * c + 1)[k - 1]


def mp_moments(c, order):
    """Moments of the Marchenko-Pastur law, orders 1..``order`` (<= 8).

    Orders up to four use the closed forms; higher orders sum
    ``c^(k - #blocks)`` over non-crossing partitions. ``c = 0`` gives the
    moments of the point mass at one.
    """
    if order < 1 or order > MAX_ORDER:
        raise ValueError(f"order must be in 1..{MAX_ORDER}")
    if c < 0:
        raise ValueError("c must be non-negative")
    out = []
    for k in range(1, order + 1):
        if k <= 4:
            out.append(_mp_closed_form(c, k))
        else:
            out.append(sum(mult * c ** (k - len(sizes))
                           for sizes, mult in noncrossing_block_types(k)))
    return out


def _nc_term(m, c, k, skip_full_block):
    total = 0
    for sizes, mult in noncrossing_block_types(k):
        if skip_full_block and len(sizes) == 1:
            continue
        total += mult * c ** (len(sizes) - 1) * prod(m[s - 1] for s in sizes)
    return total


def mult_conv_mp_nc(m, c):
    """Moments of ``eta boxtimes mu_c`` by non-crossing enumeration."""
    m = list(m)
    return [_nc_term(m, c, k, False) for k in range(1, len(m) + 1)]


def mult_deconv_mp_nc(M, c):
    """Inverse of :func:`mult_conv_mp_nc`, solved order by order."""
    M = list(M)
    m = []
    for k in range(1, len(M) + 1):
        m.append(M[k - 1] - _nc_term(m + [0], c, k, True))
    return m


def _check_order(seq):
    if not 1 <= len(seq) <= MAX_ORDER:
        raise ValueError(f"moment order must be in 1..{MAX_ORDER}")


def mult_conv_mp(m, c):
    """Moments of ``eta boxtimes mu_c`` from the moments ``m`` of ``eta``."""
    m = list(m)
    _check_order(m)
    if len(m) > 4:
        return mult_conv_mp_nc(m, c)
    m1, m2, m3, m4 = m + [0] * (4 - len(m))
    out = [
        m1,
        m2 + c * m1 ** 2,
        m3 + 3 * c * m1 * m2 + c ** 2 * m1 ** 3,
        m4 + 4 * c * m1 * m3 + 2 * c * m2 ** 2 + 6 * c ** 2 * m1 ** 2 * m2
        + c ** 3 * m1 ** 4,
    ]
    return out[:len(m)]


def mult_deconv_mp(M, c):
    """Moments of ``eta`` given the moments ``M`` of ``eta boxtimes mu_c``."""
    M = list(M)
    _check_order(M)
    if len(M) > 4:
        return mult_deconv_mp_nc(M, c)
    M1, M2, M3, M4 = M + [0] * (4 - len(M))
    out = [
        M1,
        M2 - c * M1 ** 2,
        M3 - 3 * c * M1 * M2 + 2 * c ** 2 * M1 ** 3,
        M4 - 4 * c * M1 * M3 - 2 * c * M2 ** 2 + 10 * c ** 2 * M1 ** 2 * M2
        - 5 * c ** 3 * M1 ** 4,
    ]
    return out[:len(M)]


def add_conv_dirac(m, t):
    """Moments of the measure shifted by ``t`` (``eta boxplus delta_t``).

    A negative ``t`` undoes a previous shift.
    """
    full = [1] + list(m)
    return [sum(comb(k, j) * full[j] * t ** (k - j) for j in range(k + 1))
            for k in range(1, len(full))]
