"""Reduced quadratic program for the cutting-plane trainer.

Solves   min  1/2 ||w||^2 + (C/n) * sum_i xi_i
         s.t. w . a_k >= loss_k - xi_{i(k)}   for every working-set row k
              xi >= 0,  w >= 0

by blockwise dual coordinate ascent. Each margin row carries a
multiplier alpha_k in [0, C/n] with the rows of one example sharing the
C/n budget; the w >= 0 constraints enter through an extra multiplier
vector beta whose exact update is a projection. The iteration stops when
the primal-dual gap falls below a 1e-9 relative KKT tolerance.

Floats are fine here: the trainer converts features once, and rounds the
returned weights back to rationals before they touch the exact solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

_GAP_TOL = 1e-9
_MAX_SWEEPS = 200_000


@dataclass
class QpRow:
    example: int
    delta_psi: tuple[float, ...]  # Psi(x_i, y') - Psi(x_i, y_i), cost convention
    loss: float


@dataclass
class QpResult:
    w: list[float]
    xi: list[float]
    objective: float  # primal value at w
    gap: float        # primal-dual gap at exit
    sweeps: int


def _primal(w, rows: Sequence[QpRow], cpn: float, n: int):
    xi = [0.0] * n
    for r in rows:
        slack = r.loss - _dot(w, r.delta_psi)
        if slack > xi[r.example]:
            xi[r.example] = slack
    reg = 0.5 * _dot(w, w)
    return reg + cpn * sum(xi), xi


def _dot(a, b) -> float:
    return sum(x * y for x, y in zip(a, b))


def solve_qp(rows: Sequence[QpRow], C: float, n: int, dim: int) -> QpResult:
    """Optimal (w, xi) for the reduced QP over the given working set."""
    if C <= 0:
        raise ValueError("C must be positive")
    if n <= 0:
        raise ValueError("n must be positive")
    cpn = C / n
    if dim == 0:
        xi = [0.0] * n
        for r in rows:
            if r.loss > xi[r.example]:
                xi[r.example] = r.loss
        return QpResult([], xi, cpn * sum(xi), 0.0, 0)
    if not rows:
        return QpResult([0.0] * dim, [0.0] * n, 0.0, 0.0, 0)

    alpha = [0.0] * len(rows)
    beta = [0.0] * dim
    # t = sum_k alpha_k a_k + beta; the candidate primal w.
    t = [0.0] * dim
    norms = [_dot(r.delta_psi, r.delta_psi) for r in rows]
    budget_used = [0.0] * n
    groups: dict[int, list[int]] = {}
    for k, r in enumerate(rows):
        groups.setdefault(r.example, []).append(k)

    sweeps = 0
    gap = float("inf")
    while sweeps < _MAX_SWEEPS:
        sweeps += 1
        for k, r in enumerate(rows):
            cap = cpn - (budget_used[r.example] - alpha[k])
            if norms[k] == 0.0:
                new = cap if r.loss > 0 else 0.0
            else:
                step = (r.loss - _dot(t, r.delta_psi)) / norms[k]
                new = alpha[k] + step
                if new < 0.0:
                    new = 0.0
                elif new > cap:
                    new = cap
            d = new - alpha[k]
            if d != 0.0:
                budget_used[r.example] += d
                alpha[k] = new
                for j, a in enumerate(r.delta_psi):
                    if a:
                        t[j] += d * a
        # Pairwise exchange inside each example's block: with the shared
        # C/n budget tight, improving directions move mass between two
        # rows of the same example, which single-coordinate steps cannot.
        for ks in groups.values():
            if len(ks) < 2:
                continue
            for a_i in range(len(ks)):
                for b_i in range(a_i + 1, len(ks)):
                    k1, k2 = ks[a_i], ks[b_i]
                    r1, r2 = rows[k1], rows[k2]
                    diff = [x - y for x, y in zip(r1.delta_psi, r2.delta_psi)]
                    dn = _dot(diff, diff)
                    if dn == 0.0:
                        continue
                    step = (r1.loss - r2.loss - _dot(t, diff)) / dn
                    step = max(-alpha[k1], min(alpha[k2], step))
                    if step != 0.0:
                        alpha[k1] += step
                        alpha[k2] -= step
                        for j, a in enumerate(diff):
                            if a:
                                t[j] += step * a
        for j in range(dim):
            s_j = t[j] - beta[j]
            nb = -s_j if s_j < 0 else 0.0
            if nb != beta[j]:
                t[j] += nb - beta[j]
                beta[j] = nb
        if sweeps % 8 == 0 or sweeps <= 2:
            w = [v if v > 0 else 0.0 for v in t]
            primal, _ = _primal(w, rows, cpn, n)
            dual = sum(a * r.loss for a, r in zip(alpha, rows)) - 0.5 * _dot(t, t)
            gap = primal - dual
            if gap <= _GAP_TOL * max(1.0, abs(primal)):
                break

    w = [v if v > 0 else 0.0 for v in t]
    primal, xi = _primal(w, rows, cpn, n)
    dual = sum(a * r.loss for a, r in zip(alpha, rows)) - 0.5 * _dot(t, t)
    return QpResult(w, xi, primal, primal - dual, sweeps)
