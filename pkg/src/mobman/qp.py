"""Dense convex QP solver: box bounds plus general linear inequalities.

    min 1/2 x^T H x + g^T x   s.t.  A x <= b,  lb <= x <= ub

Operator splitting (ADMM) provides a globally convergent outer loop; once
the iterates settle, the active set is identified and the solution is
polished by solving the equality-constrained KKT system exactly, giving
residuals at machine precision for these small, strictly convex problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 4000


@dataclass(frozen=True)
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        g = np.asarray(self.g, dtype=float)
        n = g.size
        if H.shape != (n, n):
            raise ValueError(f"H shape {H.shape} does not match g size {n}")
        if np.max(np.abs(H - H.T)) > 1e-10:
            raise ValueError("H must be symmetric within 1e-10")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "g", g)
        A = None if self.A is None else np.asarray(self.A, dtype=float).reshape(-1, n)
        b = None if self.b is None else np.asarray(self.b, dtype=float).ravel()
        if (A is None) != (b is None) or (A is not None and A.shape[0] != b.size):
            raise ValueError("A and b must be given together with matching rows")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float)
        ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if lb.shape != (n,) or ub.shape != (n,):
            raise ValueError("box bounds must match problem dimension")
        if np.any(lb > ub):
            raise ValueError("infeasible box: lb > ub")
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def n(self) -> int:
        return self.g.size

    @property
    def m(self) -> int:
        return 0 if self.A is None else self.A.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.g @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    status: str  # "optimal" | "max_iter" | "infeasible"
    primal_residual: float
    stationarity_residual: float
    iterations: int
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _stacked(p: QpProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constraints as l <= Cx <= u with C = [A; I]."""
    n = p.n
    if p.m:
        C = np.vstack([p.A, np.eye(n)])
        l = np.concatenate([np.full(p.m, -np.inf), p.lb])
        u = np.concatenate([p.b, p.ub])
    else:
        C = np.eye(n)
        l, u = p.lb.copy(), p.ub.copy()
    return C, l, u


def _residuals(p: QpProblem, C, l, u, x, y) -> tuple[float, float]:
    Cx = C @ x
    r_prim = float(np.max(np.maximum(np.maximum(Cx - u, l - Cx), 0.0), initial=0.0))
    r_dual = float(np.max(np.abs(p.H @ x + p.g + C.T @ y), initial=0.0))
    return r_prim, r_dual


def _complementarity(C, l, u, x, y) -> float:
    """max |y_i| * slack of the bound its sign points at (0 at a KKT point)."""
    Cx = C @ x
    slack_u = np.where(np.isfinite(u), u - Cx, np.inf)
    slack_l = np.where(np.isfinite(l), Cx - l, np.inf)
    with np.errstate(invalid="ignore"):  # 0 * inf on rows with zero multiplier
        gap = np.where(y > 0, y * slack_u, -y * slack_l)
    return float(np.max(np.where(np.abs(y) > 1e-12, gap, 0.0), initial=0.0))


def _polish(p: QpProblem, C, l, u, x, y, tol: float) -> tuple[np.ndarray, np.ndarray] | None:
    """Refine an approximate solution by exact active-set KKT solves.

    Starting from the ADMM-identified active set, alternately drop
    wrong-sign multipliers and add violated rows until KKT-consistent.
    """
    n = p.n
    Cx = C @ x
    act_tol = max(1e-7, 10 * tol)
    lower = (Cx - l < act_tol) & np.isfinite(l)
    upper = (u - Cx < act_tol) & np.isfinite(u)
    for _ in range(40):
        idx = np.flatnonzero(lower | upper)
        d = np.where(upper, u, l)[idx]
        k = idx.size
        KKT = np.zeros((n + k, n + k))
        KKT[:n, :n] = p.H
        KKT[:n, n:] = C[idx].T
        KKT[n:, :n] = C[idx]
        rhs = np.concatenate([-p.g, d])
        try:
            sol = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError:
            # Redundant active rows: least-squares KKT solve
            sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
        xs, nu = sol[:n], sol[n:]
        y_full = np.zeros(C.shape[0])
        y_full[idx] = nu
        Cxs = C @ xs
        # An inconsistent (over-determined) active set makes the least-squares
        # KKT solve miss its own pins; drop the worst-pinned row and retry.
        pin_err = np.abs(Cxs[idx] - d)
        if k and pin_err.max(initial=0.0) > 1e-9:
            worst = idx[int(np.argmax(pin_err))]
            lower[worst] = upper[worst] = False
            continue
        sign_bad = ((nu < -1e-10) & upper[idx]) | ((nu > 1e-10) & lower[idx])
        viol = ((Cxs - u > 1e-11) | (l - Cxs > 1e-11)) & ~(lower | upper)
        if not sign_bad.any() and not viol.any():
            return xs, y_full
        # drop the worst wrong-sign multiplier, then add violated rows
        if sign_bad.any():
            worst = idx[np.argmax(np.where(sign_bad, np.abs(nu), -1.0))]
            lower[worst] = upper[worst] = False
        if viol.any():
            over = np.where(viol, np.maximum(Cxs - u, l - Cxs), -np.inf)
            j = int(np.argmax(over))
            if Cxs[j] - u[j] >= l[j] - Cxs[j]:
                upper[j] = True
            else:
                lower[j] = True
    return None


def solve_qp(
    p: QpProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
) -> QpSolution:
    """Solve the QP to the requested KKT tolerance; deterministic."""
    n = p.n
    C, l, u = _stacked(p)
    mC = C.shape[0]

    # Fast path: unconstrained minimizer already feasible.
    x_free = np.linalg.solve(p.H, -p.g)
    Cxf = C @ x_free
    if np.all(Cxf <= u + tol) and np.all(Cxf >= l - tol):
        r_prim, r_dual = _residuals(p, C, l, u, x_free, np.zeros(mC))
        return QpSolution(x_free, "optimal", r_prim, r_dual, 0, np.zeros(mC))

    x = np.clip(x_free, p.lb, p.ub) if warm_start is None else warm_start[0].copy()
    y = np.zeros(mC) if warm_start is None else warm_start[1].copy()
    z = np.clip(C @ x, l, u)

    sigma, alpha = 1e-6, 1.6
    rho = 0.1
    K = np.linalg.cholesky(p.H + sigma * np.eye(n) + rho * C.T @ C)
    eps_admm = max(1e-7, tol)
    it = 0
    while it < max_iter:
        it += 1
        rhs = sigma * x - p.g + C.T @ (rho * z - y)
        xt = np.linalg.solve(K.T, np.linalg.solve(K, rhs))
        zt = C @ xt
        x = alpha * xt + (1 - alpha) * x
        z_mix = alpha * zt + (1 - alpha) * z
        y_prev = y
        z = np.clip(z_mix + y / rho, l, u)
        y = y + rho * (z_mix - z)

        if it % 25 == 0 or it == max_iter:
            # splitting residual: y is complementary to z by construction,
            # so Cx == z is what makes x itself optimal
            r_split = float(np.max(np.abs(C @ x - z), initial=0.0))
            _, r_dual = _residuals(p, C, l, u, x, y)
            if r_split < eps_admm and r_dual < eps_admm:
                break
            # primal infeasibility certificate
            dy = y - y_prev
            ndy = np.max(np.abs(dy), initial=0.0)
            if ndy > 1e-12 and np.max(np.abs(C.T @ dy)) <= 1e-10 * ndy:
                gap = float(np.sum(np.where(dy > 0, np.where(np.isfinite(u), u, 0.0) * dy, 0.0))
                            + np.sum(np.where(dy < 0, np.where(np.isfinite(l), l, 0.0) * dy, 0.0)))
                if gap < -1e-10 * ndy and not (np.isinf(u[dy > 0]).any() or np.isinf(l[dy < 0]).any()):
                    r_prim, r_dual = _residuals(p, C, l, u, x, y)
                    return QpSolution(x, "infeasible", r_prim, r_dual, it, y)
            # residual-balancing rho adaptation
            scale = np.sqrt(max(r_split, 1e-16) / max(r_dual, 1e-16))
            if scale > 5.0 or scale < 0.2:
                rho = float(np.clip(rho * scale, 1e-6, 1e6))
                K = np.linalg.cholesky(p.H + sigma * np.eye(n) + rho * C.T @ C)

    polished = _polish(p, C, l, u, x, y, tol)
    if polished is not None:
        xp, yp = polished
        r_prim, r_dual = _residuals(p, C, l, u, xp, yp)
        if r_prim <= tol and r_dual <= tol and _complementarity(C, l, u, xp, yp) <= tol:
            return QpSolution(xp, "optimal", r_prim, r_dual, it, yp)
    r_prim, r_dual = _residuals(p, C, l, u, x, y)
    converged = r_prim <= tol and r_dual <= tol and _complementarity(C, l, u, x, y) <= np.sqrt(tol)
    return QpSolution(x, "optimal" if converged else "max_iter", r_prim, r_dual, it, y)


def dump_problem(p: QpProblem, path) -> None:
    """Plain-text dump (one matrix per block, row-major) for offline checks."""
    with open(path, "w") as f:
        for name, mat in (("H", p.H), ("g", p.g), ("A", p.A), ("b", p.b), ("lb", p.lb), ("ub", p.ub)):
            if mat is None:
                continue
            arr = np.atleast_2d(np.asarray(mat, dtype=float))
            f.write(f"# {name} {arr.shape[0]} {arr.shape[1]}\n")
            for row in arr:
                f.write(" ".join(repr(float(v)) for v in row) + "\n")
