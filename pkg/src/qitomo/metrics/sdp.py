"""Dense primal-dual interior-point solver for small block-diagonal SDPs.

Solves the linear-matrix-inequality problem

    minimize    c @ x
    subject to  F0 + sum_i x_i F_i  >= 0      (block diagonal, Hermitian)

through the standard pair

    (P)  min <C, X>   s.t. <A_i, X> = b_i,  X >= 0
    (D)  max b @ y    s.t. sum_i y_i A_i + S = C,  S >= 0

with ``C = F0``, ``A_i = F_i``, ``b = c`` and ``x = -y``.  Search directions
are HKM with Mehrotra predictor-corrector steps from an infeasible start.
Intended for instances with a few dozen variables and blocks up to ~20x20.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from ..errors import NumericalError


@dataclass
class LMIResult:
    x: np.ndarray
    value: float  # c @ x at the returned (dual-feasible) point
    lower: float  # weak-duality lower bound
    iterations: int
    converged: bool


def _inner(As, Bs):
    return sum(np.real(np.vdot(a, b)) for a, b in zip(As, Bs))


def _sym(K):
    return 0.5 * (K + K.conj().T)


def _max_step(Xb, dXb):
    """Largest alpha with X + alpha dX >= 0 (inf if unbounded)."""
    amax = np.inf
    for X, dX in zip(Xb, dXb):
        L = np.linalg.cholesky(X)
        Li = np.linalg.inv(L)
        w = np.linalg.eigvalsh(_sym(Li @ dX @ Li.conj().T))
        lo = w.min()
        if lo < 0:
            amax = min(amax, -1.0 / lo)
    return amax


def solve_lmi(c, F0, F, tol: float = 1e-9, accept: float = 1e-6,
              max_iter: int = 100) -> LMIResult:
    """Solve the LMI problem above.

    ``F0`` is a list of Hermitian blocks; ``F`` is a list (one per block) of
    arrays of shape ``(m, n_b, n_b)`` holding ``F_i`` restricted to that
    block.  Iteration stops once relative gap and residuals are below
    ``tol``.  On degenerate instances progress can stall first; the best
    iterate is then returned provided its measures are below ``accept``,
    otherwise :class:`NumericalError` is raised with both bounds.
    """
    c = np.asarray(c, dtype=float)
    m = c.size
    C = [np.asarray(b, dtype=complex) for b in F0]
    A = [np.asarray(a, dtype=complex) for a in F]
    b = c
    n = sum(blk.shape[0] for blk in C)

    normA = np.sqrt(sum(np.sum(np.abs(a) ** 2, axis=(1, 2)) for a in A))
    normC = np.sqrt(sum(np.sum(np.abs(blk) ** 2) for blk in C))
    xi = max(10.0, np.sqrt(n), n * np.max((1 + np.abs(b)) / (1 + normA)))
    eta = max(10.0, np.sqrt(n), normA.max(), normC)
    X = [xi * np.eye(blk.shape[0], dtype=complex) for blk in C]
    S = [eta * np.eye(blk.shape[0], dtype=complex) for blk in C]
    y = np.zeros(m)

    def Aop(Ks):
        return sum(np.real(np.einsum("iab,ba->i", a, k)) for a, k in zip(A, Ks))

    def ATop(v):
        return [np.einsum("i,iab->ab", v, a) for a in A]

    normb = np.linalg.norm(b)
    converged = False
    best = (np.inf, y, X)
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        rp = b - Aop(X)
        ATy = ATop(y)
        Rd = [Cb - Sb - Ab for Cb, Sb, Ab in zip(C, S, ATy)]
        pobj = _inner(C, X)
        dobj = float(b @ y)
        gap = _inner(X, S)
        mu = gap / n
        pinf = np.linalg.norm(rp) / (1 + normb)
        dinf = np.sqrt(sum(np.sum(np.abs(r) ** 2) for r in Rd)) / (1 + normC)
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        score = max(relgap, gap / (1 + abs(pobj) + abs(dobj)), pinf, dinf)
        if score < best[0]:
            best = (score, y, X)
            stall = 0
        else:
            stall += 1
        if score < tol:
            converged = True
            break
        if stall >= 5:
            break

        Sinv = [np.linalg.inv(Sb) for Sb in S]
        # Schur complement M_ij = Re Tr(A_i X A_j S^-1)
        M = np.zeros((m, m))
        for a, Xb, Si in zip(A, X, Sinv):
            left = np.einsum("iab,bc->iac", a, Xb)
            right = np.einsum("jab,bc->jac", a, Si)
            M += np.real(np.einsum("iac,jca->ij", left, right))
        M = 0.5 * (M + M.T)
        try:
            fac = cho_factor(M)

            def solve(r):
                return cho_solve(fac, r)
        except LinAlgError:
            def solve(r):
                return np.linalg.lstsq(M, r, rcond=None)[0]

        def direction(sigma, corr):
            Rc = []
            for Xb, Si, Rb, k in zip(X, Sinv, Rd, range(len(X))):
                t = sigma * mu * Si - Xb - Xb @ Rb @ Si
                if corr is not None:
                    t = t - corr[0][k] @ corr[1][k] @ Si
                Rc.append(t)
            dy = solve(rp - Aop(Rc))
            ATdy = ATop(dy)
            dS = [_sym(Rb - a) for Rb, a in zip(Rd, ATdy)]
            dX = []
            for Xb, Si, dSb, k in zip(X, Sinv, dS, range(len(X))):
                t = sigma * mu * Si - Xb - Xb @ dSb @ Si
                if corr is not None:
                    t = t - corr[0][k] @ corr[1][k] @ Si
                dX.append(_sym(t))
            return dX, dy, dS

        try:
            dXp, dyp, dSp = direction(0.0, None)
            ap = min(1.0, _max_step(X, dXp))
            ad = min(1.0, _max_step(S, dSp))
            gp = _inner([Xb + ap * d for Xb, d in zip(X, dXp)],
                        [Sb + ad * d for Sb, d in zip(S, dSp)])
            sigma = min(1.0, max(0.0, (gp / gap) ** 3)) if gap > 0 else 0.0
            dX, dy, dS = direction(sigma, (dXp, dSp))
            ap = min(1.0, 0.95 * _max_step(X, dX))
            ad = min(1.0, 0.95 * _max_step(S, dS))
        except (LinAlgError, np.linalg.LinAlgError):
            break  # iterate lost definiteness; fall back to the best one
        X = [_sym(Xb + ap * d) for Xb, d in zip(X, dX)]
        S = [_sym(Sb + ad * d) for Sb, d in zip(S, dS)]
        y = y + ad * dy

    score, y, X = best
    x = -y
    value = float(c @ x)
    lower = -_inner(C, X)
    if score >= accept:
        raise NumericalError(
            "interior-point iteration did not converge",
            upper=value, lower=lower, iterations=it, residual=float(score),
        )
    return LMIResult(x=x, value=value, lower=lower, iterations=it,
                     converged=converged)
