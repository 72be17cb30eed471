"""Exact expected moments of Gaussian and information-plus-noise matrices.

Expected Wishart moments are computed by enumerating the symmetric group:
for each permutation ``pi`` of ``{1..p}`` build the paired permutation
``pi_hat`` of ``{1..2p}``, close the relation ``j ~ pi_hat(j) + 1`` (mod
``2p``), and count classes of even and odd numbers. Then

    E[tr_n((X X^H / N)^p)] = (1 / (n N^p)) sum_pi N^k(pi_hat) n^l(pi_hat).

Everything is exact (:class:`fractions.Fraction`).
"""

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

MAX_P = 8


@dataclass(frozen=True)
class PairedPermutation:
    """A permutation with its induced pairing and class counts.

    ``pi`` and ``pi_hat`` are one-based tuples: ``pi[j-1] = pi(j)``.
    ``classes`` is sorted by smallest element, each class sorted.
    """

    pi: tuple
    pi_hat: tuple
    classes: tuple
    k_classes: int
    l_classes: int

    @property
    def p(self):
        return len(self.pi)


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def equivalence_classes(pi):
    """Build :class:`PairedPermutation` for a one-based permutation ``pi``.

    >>> equivalence_classes((3, 1, 2)).classes
    ((1, 3, 5), (2, 4, 6))
    """
    pi = tuple(int(v) for v in pi)
    p = len(pi)
    if p == 0 or sorted(pi) != list(range(1, p + 1)):
        raise ValueError(f"not a permutation of 1..{p}: {pi}")
    inv = [0] * (p + 1)
    for j, v in enumerate(pi, start=1):
        inv[v] = j
    hat = [0] * (2 * p + 1)
    for j in range(1, p + 1):
        hat[2 * j - 1] = 2 * inv[j]
        hat[2 * j] = 2 * pi[j - 1] - 1

    parent = list(range(2 * p + 1))
    for j in range(1, 2 * p + 1):
        # representative 2p rather than 0
        partner = hat[j] % (2 * p) + 1
        a, b = _find(parent, j), _find(parent, partner)
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups = {}
    for j in range(1, 2 * p + 1):
        groups.setdefault(_find(parent, j), []).append(j)
    classes = tuple(sorted(tuple(g) for g in groups.values()))
    k = sum(1 for g in classes if g[0] % 2 == 0)
    return PairedPermutation(pi=pi, pi_hat=tuple(hat[1:]), classes=classes,
                             k_classes=k, l_classes=len(classes) - k)


def class_table(p):
    """All permutations of ``S_p`` in lexicographic order with their classes."""
    if not 1 <= p <= MAX_P:
        raise ValueError(f"p must be in 1..{MAX_P}")
    return [equivalence_classes(pi) for pi in permutations(range(1, p + 1))]


@lru_cache(maxsize=None)
def _kl_counts(p):
    counts = Counter()
    for pp in class_table(p):
        counts[(pp.k_classes, pp.l_classes)] += 1
    return tuple(sorted(counts.items()))


def expected_wishart_moment(n, N, p):
    """Exact ``E[tr_n((X X^H / N)^p)]`` for ``X`` complex Gaussian ``n x N``.

    >>> expected_wishart_moment(2, 4, 3)
    Fraction(45, 16)
    """
    if p > MAX_P:
        raise ValueError(f"p must be <= {MAX_P} (S_p enumeration guard)")
    if p < 1 or n < 1 or N < 1:
        raise ValueError("n, N and p must be positive")
    total = sum(mult * N ** k * n ** l for (k, l), mult in _kl_counts(p))
    return Fraction(total, n * N ** p)


def wishart_moment_closed_form(n, N, p):
    """Low-order closed forms of the expected Wishart moments (``p <= 4``)."""
    c = Fraction(n, N)
    forms = {
        1: lambda: Fraction(1),
        2: lambda: c + 1,
        3: lambda: c ** 2 + 3 * c + 1 + Fraction(1, N ** 2),
        4: lambda: c ** 3 + 6 * c ** 2 + 6 * c + 1 + Fraction(5, N ** 2) * (1 + c),
    }
    if p not in forms:
        raise ValueError("closed forms are available for p in 1..4")
    return forms[p]()


def mixed_moment_expectation(m, c, N, sigma2):
    """Expected moments of ``W = (R + sigma X)(R + sigma X)^H / N``.

    ``m`` holds the first four moments of ``R R^H / N`` for a deterministic
    ``R``; callers with a random ``R`` independent of ``X`` may pass expected
    moments instead (``m[0]**2`` is then understood as ``E[m_1^2]``).

    Returns ``[E tr_n(W), ..., E tr_n(W^4)]``.
    """
    if len(m) < 4:
        raise ValueError("need the first four moments")
    m1, m2, m3, m4 = list(m)[:4]
    s2 = sigma2
    inv = Fraction(1, N ** 2) if isinstance(N, int) else 1 / N ** 2
    k3 = c ** 2 + 3 * c + 1 + inv
    k4 = c ** 3 + 6 * c ** 2 + 6 * c + 1 + 5 * (c + 1) * inv
    return [
        m1 + s2,
        m2 + 2 * s2 * (1 + c) * m1 + s2 ** 2 * (1 + c),
        m3 + 3 * s2 * (1 + c) * m2 + 3 * s2 * c * m1 ** 2
        + 3 * s2 ** 2 * k3 * m1 + s2 ** 3 * k3,
        m4 + 4 * s2 * (1 + c) * m3 + 8 * s2 * c * m2 * m1
        + s2 ** 2 * (6 * c ** 2 + 16 * c + 6 + 16 * inv) * m2
        + 14 * s2 ** 2 * c * (1 + c) * m1 ** 2
        + 4 * s2 ** 3 * k4 * m1 + s2 ** 4 * k4,
    ]
