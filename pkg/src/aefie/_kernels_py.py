"""Pure numpy versions of the pair-contraction kernels."""

import numpy as np

FOUR_PI = 4.0 * np.pi


def _green(r, kappa):
    if kappa == 0.0:
        return (1.0 / (FOUR_PI * r)).astype(complex)
    return np.exp(-1j * kappa * r) / (FOUR_PI * r)


def _contract(V1, T):
    # V1 (K, Q, n1, c), T (K, Q, n2, c) -> (K, n1, n2)
    K, Q, n1, c = V1.shape
    n2 = T.shape[2]
    A = V1.transpose(0, 2, 1, 3).reshape(K, n1, Q * c)
    B = T.transpose(0, 1, 3, 2).reshape(K, Q * c, n2)
    return A @ B


def regular_pairs(X1, X2, VL1, VL2, VP1, VP2, kappa):
    """Galerkin blocks for element pairs on tensor rules.

    ``X`` are quadrature points ``(K, Q, 3)``; ``VL`` vector test functions
    ``(K, Q, n, 3)`` and ``VP`` scalar ones ``(K, Q, n, 1)``, both with the
    quadrature weights folded in. Returns ``(L, P)`` of shapes
    ``(K, nL1, nL2)`` and ``(K, nP1, nP2)``.
    """
    r = np.sqrt(((X1[:, :, None, :] - X2[:, None, :, :]) ** 2).sum(axis=-1))
    G = _green(r, kappa)
    out = []
    for V1, V2 in ((VL1, VL2), (VP1, VP2)):
        K, Q2, n2, c = V2.shape
        T = (G @ V2.reshape(K, Q2, n2 * c)).reshape(K, -1, n2, c)
        out.append(_contract(V1, T))
    return out[0], out[1]


def pointwise_pairs(X, Y, VL1, VL2, VP1, VP2, kappa):
    """Same contraction for rules given as matched point pairs ``(K, R, 3)``."""
    r = np.sqrt(((X - Y) ** 2).sum(axis=-1))
    G = _green(r, kappa)[:, :, None, None]
    return _contract(VL1 * G, VL2.astype(complex)), _contract(VP1 * G, VP2.astype(complex))
