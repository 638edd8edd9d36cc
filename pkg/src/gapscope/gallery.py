"""Instance gallery with closed-form ground truths.

Entries are constructed in code so the known values stay exact; the
.dat-s fixtures used by the parser tests are generated from them.

``ramana``: the classic 3x3 gap pair (primal value 1, dual value 0,
one facial reduction step on each side) whose limiting profile is the
piecewise formula in :func:`ramana_limit_value`.

``sd2``: a 4x4 modification needing two dual reduction steps; its
limiting profile jumps: 1 on [0, pi/2) and 0 at pi/2. An explicit
strictly feasible family for its regularized dual is provided for
t small enough.

``control``: a seeded strongly feasible pair, the negative control with
no gap and an empty face chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NotYetFeasible
from .linalg import is_psd
from .model import SdpInstance, make_instance


@dataclass(frozen=True, eq=False)
class GalleryEntry:
    instance: SdpInstance
    known_vp: Optional[float] = None
    known_vd: Optional[float] = None
    known_sd_primal: Optional[int] = None
    known_sd_dual: Optional[int] = None
    va_oracle: Optional[Callable[[float], float]] = None
    notes: str = ""


def ramana_limit_value(theta: float) -> float:
    """Closed-form limiting value of the ramana entry.

    1 - tan(theta) while tan(theta) <= 1/2, then cot(theta)/4; the two
    branches meet at value 1/2. Decreases strictly from 1 to 0 over
    [0, pi/2].
    """
    if not 0.0 <= theta <= math.pi / 2:
        raise DomainError(f"theta={theta!r} outside [0, pi/2]")
    if theta == math.pi / 2:
        return 0.0
    tan = math.tan(theta)
    if tan <= 0.5:
        return 1.0 - tan
    return 0.25 / tan


def ramana_gap() -> GalleryEntry:
    """3x3 pair with primal value 1, dual value 0, gap 1."""
    c = np.diag([1.0, 0.0, 0.0])
    a1 = np.array([[1.0, 0.0, 0.0],
                   [0.0, 0.0, 1.0],
                   [0.0, 1.0, 0.0]])
    a2 = np.diag([0.0, 1.0, 0.0])
    inst = make_instance(c, [a1, a2], [1.0, 0.0], name="ramana")
    return GalleryEntry(
        instance=inst, known_vp=1.0, known_vd=0.0,
        known_sd_primal=1, known_sd_dual=1,
        va_oracle=ramana_limit_value,
        notes="dual slack forces y1 = 0; primal psd-ness forces x11 = 1")


def sd2_limit_value(theta: float) -> float:
    """Limiting profile of the sd2 entry: 1 on [0, pi/2), 0 at pi/2."""
    if not 0.0 <= theta <= math.pi / 2:
        raise DomainError(f"theta={theta!r} outside [0, pi/2]")
    return 0.0 if theta == math.pi / 2 else 1.0


def sd2_gap() -> GalleryEntry:
    """4x4 pair whose dual needs two facial reduction steps.

    The (4,4) slack entry is identically zero, forcing y3 = 0 and then
    y1 = 0, so the dual value is 0 while the primal value is 1. The
    limiting profile is discontinuous at pi/2.
    """
    c = np.zeros((4, 4))
    c[0, 0] = 1.0
    a1 = np.zeros((4, 4))
    a1[0, 0] = 1.0
    a1[1, 2] = a1[2, 1] = 1.0
    a2 = np.zeros((4, 4))
    a2[1, 1] = 1.0
    a3 = np.zeros((4, 4))
    a3[0, 2] = a3[2, 0] = 1.0
    a3[0, 3] = a3[3, 0] = 1.0
    a3[2, 2] = 1.0
    inst = make_instance(c, [a1, a2, a3], [1.0, 0.0, 0.0], name="sd2")
    return GalleryEntry(
        instance=inst, known_vp=1.0, known_vd=0.0,
        known_sd_primal=None, known_sd_dual=2,
        va_oracle=sd2_limit_value,
        notes="primal singularity degree recorded as unverified; run the "
              "reduction to observe it")


@dataclass(frozen=True)
class CexParams:
    """Parameters of the explicit feasible family for the sd2 dual."""

    gamma: float
    zeta: float
    xi: float
    alpha: float
    t: float

    def __post_init__(self):
        if min(self.gamma, self.zeta, self.xi, self.alpha, self.t) <= 0:
            raise ValueError("all parameters must be strictly positive")
        if self.gamma ** 2 + self.zeta >= 1.0:
            raise ValueError("need gamma^2 + zeta < 1")


def cex_feasible_point(p: CexParams):
    """Explicit strictly feasible point of the sd2 regularized dual.

    y3 = -gamma*sqrt(alpha*t), y1 = 1 - gamma^2 - zeta, and y2 sits xi
    below its Schur-complement bound. Verifies the four strict
    inequalities of the Schur chain (they hold once t is small enough)
    and returns (y, objective value); the objective tends to
    1 - gamma^2 - zeta as t decreases.
    """
    g, z, xi, a, t = p.gamma, p.zeta, p.xi, p.alpha, p.t
    at = a * t
    y3 = -g * math.sqrt(at)
    y1 = 1.0 - g * g - z
    head = 1.0 + at - y1 - y3 * y3 / at          # = at + z analytically
    denom = -y3 + at - y3 * y3 / head
    y2 = at - y1 * y1 / denom - xi

    checks = [
        ("t*alpha - y2 > 0", at - y2),
        ("1 + t*alpha - y1 - y3^2/(t*alpha) > 0", head),
        ("t*alpha - y1^2/denom > y2", at - y1 * y1 / denom - y2),
        ("denom > 0", denom),
    ]
    failed = [name for name, value in checks if not value > 0.0]
    if failed:
        raise NotYetFeasible(
            f"inequalities failed at t={t:g}: {', '.join(failed)}; "
            f"shrink t")
    y = np.array([y1, y2, y3])
    objective = (1.0 + at) * y1 + t * y2 + t * y3
    return y, float(objective)


def cex_lmi_matrix(y, eps):
    """Dense shifted slack of the sd2 dual at the given y."""
    y1, y2, y3 = y
    return np.array([
        [1.0 + eps - y1, 0.0, -y3, -y3],
        [0.0, eps - y2, -y1, 0.0],
        [-y3, -y1, -y3 + eps, 0.0],
        [-y3, 0.0, 0.0, eps],
    ])


def cex_point_is_strictly_feasible(p: CexParams) -> bool:
    """Independent full-matrix psd check of the constructed point."""
    y, _ = cex_feasible_point(p)
    return is_psd(cex_lmi_matrix(y, p.alpha * p.t), tol=0.0)


def strongly_feasible_control(n: int, m: int, seed: int) -> GalleryEntry:
    """Random instance with a planted strictly feasible pair.

    Deterministic per seed. Both sides satisfy Slater's condition, so
    there is no gap and the face chain is empty.
    """
    if not 1 <= m <= n * (n + 1) // 2:
        raise ValueError(f"need 1 <= m <= n(n+1)/2, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    a_mats = []
    while len(a_mats) < m:
        g = rng.standard_normal((n, n))
        cand = 0.5 * (g + g.T)
        stack = np.array([c.reshape(-1) for c in a_mats + [cand]])
        if np.linalg.matrix_rank(stack) == len(a_mats) + 1:
            a_mats.append(cand)
    g = rng.standard_normal((n, n))
    bump = 0.5 * (g + g.T)
    x0 = np.eye(n) + 0.3 * bump / max(1.0, np.linalg.norm(bump, 2))
    y0 = rng.standard_normal(m)
    c = np.eye(n) + sum(yi * a for yi, a in zip(y0, a_mats))
    b = [float(np.tensordot(a, x0)) for a in a_mats]
    inst = make_instance(c, a_mats, b, name=f"control-{n}-{m}-{seed}")
    return GalleryEntry(
        instance=inst, known_sd_primal=0, known_sd_dual=0,
        notes="planted interior pair; no gap")


_BUILDERS = {
    "ramana": ramana_gap,
    "sd2": sd2_gap,
    "control": lambda: strongly_feasible_control(2, 1, 7),
}


def gallery_names():
    return sorted(_BUILDERS)


def get_entry(name: str) -> GalleryEntry:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise DomainError(
            f"unknown gallery entry {name!r}; "
            f"known: {', '.join(gallery_names())}") from None
