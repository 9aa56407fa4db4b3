"""Constants shared by both kernel backends."""
from __future__ import annotations

import math

import numpy as np

# QUADPACK qk15 abscissae (descending, last is the centre) and weights.
_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
# 7-point Gauss weights for _XGK[1], _XGK[3], _XGK[5], _XGK[7]
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)

GK_NODES = np.array([-v for v in _XGK[:7]] + [0.0] + list(reversed(_XGK[:7])))
GK_KRONROD = np.array(list(_WGK[:7]) + [_WGK[7]] + list(reversed(_WGK[:7])))
GK_GAUSS = np.zeros(15)
for _j, _w in zip((1, 3, 5), _WG[:3]):
    GK_GAUSS[_j] = _w
    GK_GAUSS[14 - _j] = _w
GK_GAUSS[7] = _WG[3]

MAX_DEPTH = 60
# a piece is also accepted once its error estimate is at the density's own
# round-off level, and no integral may evaluate more than MAX_EVALS pieces;
# without these, noise in ill-conditioned parameter sets splits forever
REL_FLOOR = 1e-11
MAX_EVALS = 4000
LOG_PI = math.log(math.pi)


def var_index(n_obs: int, confidence: float) -> int:
    """1-based order statistic ``ceil(confidence * n_obs)`` used as the VaR level.

    The product is rounded to 9 decimals first so that e.g. ``0.99 * 300`` maps to
    297 rather than 298 when binary rounding lands just above the integer.
    """
    k = math.ceil(round(confidence * n_obs, 9))
    return min(max(k, 1), n_obs)
