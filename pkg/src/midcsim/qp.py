"""Small dense convex quadratic programming via a primal active-set method.

Sized for coefficient-allocation problems of a few dozen variables; the
Hessian may be positive semidefinite (zero-curvature directions are handled
with ray steps to the nearest blocking constraint).
"""

from __future__ import annotations

import numpy as np


class QpUnboundedError(RuntimeError):
    """Objective decreases without bound along a feasible ray."""


def _null_space(mat, n):
    """Orthonormal basis of the null space of ``mat`` (columns), n = dim."""
    if mat.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(mat)
    tol = max(mat.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    return vt[rank:].T


def _reduced_gradient(grad, g_act, z):
    """Project ``grad`` off the working-set row space, then reduce by Z.

    The straight product Z' grad leaks about eps * |grad| of any huge
    gradient component lying in the row space (e.g. a big shed penalty);
    one refinement pass of the projection removes the leak before it gets
    amplified by small reduced-Hessian eigenvalues.
    """
    r = grad
    if g_act.shape[0]:
        for _ in range(2):
            lam, *_ = np.linalg.lstsq(g_act.T, r, rcond=None)
            r = r - g_act.T @ lam
    return z.T @ r


def solve_qp(h, g, a_eq, b_eq, a_ub, b_ub, x0, max_iter=200):
    """Minimize 0.5 x'Hx + g'x  s.t.  a_eq x = b_eq,  a_ub x <= b_ub.

    ``h`` must be symmetric positive semidefinite and ``x0`` feasible.
    Returns ``(x, active, lam)`` with ``active`` the final working set of
    inequality row indices and ``lam`` their multipliers.
    """
    h = np.asarray(h, float)
    g = np.asarray(g, float)
    a_eq = np.asarray(a_eq, float).reshape(-1, len(g))
    b_eq = np.asarray(b_eq, float).ravel()
    a_ub = np.asarray(a_ub, float).reshape(-1, len(g))
    b_ub = np.asarray(b_ub, float).ravel()
    x = np.asarray(x0, float).copy()
    n = len(g)

    feas_tol = 1e-9 * (1.0 + np.abs(b_ub).max(initial=0.0))
    if a_eq.shape[0] and np.abs(a_eq @ x - b_eq).max() > 1e-9 * (1.0 + np.abs(b_eq).max()):
        raise ValueError("x0 violates the equality constraints")
    if a_ub.shape[0] and (a_ub @ x - b_ub).max() > feas_tol:
        raise ValueError("x0 violates the inequality constraints")

    work = []  # active inequality rows; equalities are always active
    lam_work = np.zeros(0)

    for _ in range(max_iter):
        g_act = np.vstack([a_eq, a_ub[work]]) if (a_eq.shape[0] or work) \
            else np.zeros((0, n))
        grad = h @ x + g
        z = _null_space(g_act, n)

        ray = False
        if z.shape[1] == 0:
            p = np.zeros(n)
        else:
            hr = z.T @ h @ z
            gr = _reduced_gradient(grad, g_act, z)
            w, v = np.linalg.eigh(hr)
            w_tol = 1e-11 * max(1.0, np.abs(w).max(initial=0.0))
            pos = w > w_tol
            c = v.T @ gr
            flat = ~pos & (np.abs(c) > 1e-11 * (1.0 + np.linalg.norm(gr)))
            if flat.any():
                # zero-curvature descent: follow the ray until blocked
                d = -(v[:, flat] @ c[flat])
                p = z @ (d / np.linalg.norm(d))
                ray = True
            elif pos.any():
                p = z @ (v[:, pos] @ (-c[pos] / w[pos]))
            else:
                p = np.zeros(n)

        if not ray and np.linalg.norm(p) <= 1e-11 * (1.0 + np.linalg.norm(x)):
            # stationary on the working set; check multiplier signs
            if g_act.shape[0] == 0:
                return x, work, lam_work
            lam, *_ = np.linalg.lstsq(g_act.T, -grad, rcond=None)
            lam_ub = lam[a_eq.shape[0]:]
            lam_work = lam_ub
            if lam_ub.size == 0 or lam_ub.min() >= -1e-9 * (1.0 + np.abs(lam).max()):
                return x, work, lam_ub
            work.pop(int(np.argmin(lam_ub)))
            continue

        # longest feasible step along p
        alpha = np.inf if ray else 1.0
        block = -1
        for r in range(a_ub.shape[0]):
            if r in work:
                continue
            d_r = a_ub[r] @ p
            if d_r > 1e-13:
                a_r = (b_ub[r] - a_ub[r] @ x) / d_r
                if a_r < alpha - 1e-15:
                    alpha = max(a_r, 0.0)
                    block = r
        if not np.isfinite(alpha):
            raise QpUnboundedError("objective unbounded along a feasible ray")
        x = x + alpha * p
        if block >= 0 and (ray or alpha < 1.0):
            work.append(block)

    raise RuntimeError(f"active-set method did not converge in {max_iter} iterations")
