"""Pure-Python twin of the compiled bit-string kernels.

Same contract as ``linres._kernels``; used automatically when the compiled
extension is not available. Words are 64-bit occupation patterns, mode ``j``
occupied iff bit ``j`` is set. Basis order is ascending integer value of the
word, which for fixed particle number is colexicographic order of the
occupied-mode tuples.
"""

import numpy as np


def rank_word(word, binom):
    """Colex rank of an N-bit word: sum of C(pos_j, j) over ascending set bits."""
    word = int(word)
    rank = 0
    j = 0
    pos = 0
    while word:
        if word & 1:
            j += 1
            rank += binom[pos, j]
        word >>= 1
        pos += 1
    return rank


def bilinear_elements(states, p, q, binom):
    """Matrix elements of a*_p a_q on a fixed-number sector.

    Parameters
    ----------
    states : uint64 array, ascending
    p, q : int mode indices (create at p, annihilate at q)
    binom : int64 array, binom[n, k] = C(n, k)

    Returns (rows, cols, signs): for each source state (column) on which the
    operator acts without vanishing, the target row index and the fermionic
    sign, with the Jordan-Wigner string counted below each acted-on mode.
    """
    rows = []
    cols = []
    signs = []
    below_q = (1 << q) - 1
    below_p = (1 << p) - 1
    bit_p = 1 << p
    bit_q = 1 << q
    for c in range(len(states)):
        w = int(states[c])
        if not w & bit_q:
            continue
        w1 = w ^ bit_q
        if w1 & bit_p:
            continue
        sign = 1
        if bin(w & below_q).count("1") & 1:
            sign = -sign
        if bin(w1 & below_p).count("1") & 1:
            sign = -sign
        w2 = w1 | bit_p
        rows.append(rank_word(w2, binom))
        cols.append(c)
        signs.append(sign)
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(signs, dtype=np.int8),
    )
