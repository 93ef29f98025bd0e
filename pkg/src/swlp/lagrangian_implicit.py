"""Time-implicit acoustic step.

The fluxes are evaluated at t^{n+1-} while the topography source stays frozen
at t^n, which makes the update linear. With a uniform relaxation speed the
system splits into two bidiagonal solves for the characteristic variables
``w+ = pi + a u`` (lower, forward substitution) and ``w- = pi - a u`` (upper,
backward substitution). With per-interface speeds the (u, pi) update is solved
as one coupled block-tridiagonal system instead. Both forms are solved for the
increment over t^n, with the explicit defect as right-hand side, so that a
discretely balanced state stays fixed regardless of dt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .acoustic_riemann import interface_fluxes
from .boundary import BoundaryPolicy, extend_implicit, implicit_ghost_mode
from .lagrangian_explicit import (AcousticContext, AcousticStepOutput, CFLViolation, _finish,
                                  acoustic_context)
from .mesh_state import FlowState, Grid1D
from .relaxation import InterfaceSpeeds


class StepRejected(CFLViolation):
    """The implicit step produced L_j <= 0; retry with a smaller dt."""


@dataclass
class CharacteristicVars:
    w_plus: np.ndarray
    w_minus: np.ndarray
    a_cell: np.ndarray

    @classmethod
    def from_primitive(cls, u, pi, a_cell) -> CharacteristicVars:
        return cls(pi + a_cell * u, pi - a_cell * u, np.broadcast_to(a_cell, np.shape(u)))

    def primitive(self):
        u = (self.w_plus - self.w_minus) / (2 * self.a_cell)
        pi = (self.w_plus + self.w_minus) / 2
        return u, pi


@dataclass
class TriangularSystem:
    """Bidiagonal operator ``diag[c] w[c] + off[c] w[nb(c)] = rhs[c]``.

    ``side='lower'`` couples cell c to c - 1, ``'upper'`` to c + 1. The first
    (lower) or last (upper) ``off`` entry links to the opposite end of the grid
    when ``cyclic`` is set and is ignored otherwise.
    """

    diag: np.ndarray
    off: np.ndarray
    rhs: np.ndarray
    side: str
    cyclic: bool = False

    def to_dense(self) -> np.ndarray:
        n = self.diag.size
        mat = np.diag(self.diag).astype(float)
        for c in range(n):
            nb = c - 1 if self.side == "lower" else c + 1
            if 0 <= nb < n:
                mat[c, nb] += self.off[c]
            elif self.cyclic:
                mat[c, nb % n] += self.off[c]
        return mat


def assemble_bidiagonal(a, dm: np.ndarray, dt: float, side: str, w_old: np.ndarray | None = None,
                        m_jump: np.ndarray | None = None, boundary: str = "open",
                        ghost: float = 0.0) -> TriangularSystem:
    """Build ``I + a dt A+`` (side='lower') or ``I - a dt A-`` (side='upper').

    ``boundary`` closes the row that touches the ghost cell: ``open`` drops the
    ghost, ``copy`` mirrors the adjacent unknown, ``periodic`` wraps around and
    ``frozen`` moves a known ghost value ``ghost`` to the right-hand side.
    ``m_jump`` holds the n + 1 interface topography jumps at t^n.
    """
    if side not in ("lower", "upper"):
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    n = dm.size
    a = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    lam = a * dt / dm
    diag = 1.0 + lam
    off = -lam.copy()
    w_old = np.zeros(n) if w_old is None else np.asarray(w_old, dtype=float)
    m_jump = np.zeros(n + 1) if m_jump is None else m_jump
    if side == "lower":
        rhs = w_old - a * dt * (m_jump[:-1] / dm)
    else:
        rhs = w_old + a * dt * (m_jump[1:] / dm)
    edge = 0 if side == "lower" else n - 1
    cyclic = False
    if boundary == "copy":
        diag[edge] = 1.0
        off[edge] = 0.0
    elif boundary == "periodic":
        cyclic = True
    elif boundary == "frozen":
        rhs[edge] -= off[edge] * ghost
        off[edge] = 0.0
    elif boundary == "open":
        off[edge] = 0.0
    else:
        raise ValueError(f"unknown boundary closure {boundary!r}")
    if np.any(diag < 1.0):
        raise ValueError("bidiagonal system lost its unit-dominant diagonal")
    return TriangularSystem(diag, off, rhs, side, cyclic)


@numba.njit(cache=True)
def _forward(diag, off, rhs, cyclic):
    n = diag.size
    alpha = np.empty(n)
    beta = np.empty(n)
    alpha[0] = rhs[0] / diag[0]
    beta[0] = -off[0] / diag[0] if cyclic else 0.0
    for c in range(1, n):
        alpha[c] = (rhs[c] - off[c] * alpha[c - 1]) / diag[c]
        beta[c] = -off[c] * beta[c - 1] / diag[c]
    if not cyclic:
        return alpha
    wrap = alpha[n - 1] / (1.0 - beta[n - 1])
    return alpha + beta * wrap


@numba.njit(cache=True)
def _backward(diag, off, rhs, cyclic):
    n = diag.size
    alpha = np.empty(n)
    beta = np.empty(n)
    alpha[n - 1] = rhs[n - 1] / diag[n - 1]
    beta[n - 1] = -off[n - 1] / diag[n - 1] if cyclic else 0.0
    for c in range(n - 2, -1, -1):
        alpha[c] = (rhs[c] - off[c] * alpha[c + 1]) / diag[c]
        beta[c] = -off[c] * beta[c + 1] / diag[c]
    if not cyclic:
        return alpha
    wrap = alpha[0] / (1.0 - beta[0])
    return alpha + beta * wrap


def solve_bidiagonal(system: TriangularSystem) -> np.ndarray:
    """Forward (lower) or backward (upper) substitution.

    In the cyclic case every unknown is carried as ``alpha + beta * w_wrap``
    and the wrap-around value is closed at the end of the sweep; ``|beta| < 1``
    because the diagonal dominates the single off-diagonal entry.
    """
    args = (np.ascontiguousarray(system.diag, dtype=np.float64),
            np.ascontiguousarray(system.off, dtype=np.float64),
            np.ascontiguousarray(system.rhs, dtype=np.float64),
            bool(system.cyclic))
    if system.side == "lower":
        return _forward(*args)
    return _backward(*args)


def _closed_ext(ctx: AcousticContext, bc: BoundaryPolicy):
    """t^n (u, pi) padded with the implicit closure of each side."""
    u_n = ctx.u_ext[1:-1]
    pi_n = ctx.pi_ext[1:-1]
    return u_n, pi_n, extend_implicit(u_n, ctx.u_ext, bc), extend_implicit(pi_n, ctx.pi_ext, bc)


def _interface_jumps(ctx: AcousticContext, bc: BoundaryPolicy):
    """Per-interface J = (pi_R - pi_L) + M and du = u_R - u_L at t^n.

    Both vanish exactly on a lake at rest whenever the hydrostatic balance is
    exact in floating point, so the increment systems below return a zero update.
    """
    u_n, pi_n, u_g, pi_g = _closed_ext(ctx, bc)
    return u_n, pi_n, (pi_g[1:] - pi_g[:-1]) + ctx.m_jump, u_g[1:] - u_g[:-1]


def characteristic_solve(ctx: AcousticContext, a: float, dt: float, bc: BoundaryPolicy):
    """Solve for (u, pi) at t^{n+1-} with a single relaxation speed ``a``.

    The systems are solved for the increments w^{n+1-} - w^n, whose right-hand
    sides are the explicit defects -lam (J + a du) (w+) and lam (J - a du) (w-).
    Frozen ghosts then carry a zero increment.
    """
    u_n, pi_n, jump, du = _interface_jumps(ctx, bc)
    lam = a * dt / ctx.dm
    left = implicit_ghost_mode(bc.left)
    right = implicit_ghost_mode(bc.right)
    lower = assemble_bidiagonal(a, ctx.dm, dt, "lower", boundary=left)
    upper = assemble_bidiagonal(a, ctx.dm, dt, "upper", boundary=right)
    lower.rhs = -lam * (jump[:-1] + a * du[:-1])
    upper.rhs = lam * (jump[1:] - a * du[1:])
    dw_plus = solve_bidiagonal(lower)
    dw_minus = solve_bidiagonal(upper)
    du_c, dpi_c = CharacteristicVars(dw_plus, dw_minus, np.full(ctx.n, a)).primitive()
    return u_n + du_c, pi_n + dpi_c


def _coupled_defect(ctx: AcousticContext, a_iface: np.ndarray, a_cell: np.ndarray, dt: float,
                    bc: BoundaryPolicy):
    """Explicit residual of the coupled (u, pi) rows at t^n."""
    u_n, pi_n, jump, du = _interface_jumps(ctx, bc)
    lam = dt / ctx.dm
    aL, aR = a_iface[:-1], a_iface[1:]
    r_u = -0.5 * lam * ((jump[1:] + jump[:-1]) - (aR * du[1:] - aL * du[:-1]))
    r_pi = -lam * a_cell**2 * (0.5 * (du[1:] + du[:-1]) - jump[1:] / (2 * aR) + jump[:-1] / (2 * aL))
    return u_n, pi_n, r_u, r_pi


def _interface_refs(n: int, bc: BoundaryPolicy):
    left = np.arange(-1, n)
    right = np.arange(0, n + 1)
    mode_l = implicit_ghost_mode(bc.left)
    mode_r = implicit_ghost_mode(bc.right)
    left[0] = {"copy": 0, "periodic": n - 1, "frozen": -1}[mode_l]
    right[n] = {"copy": n - 1, "periodic": 0, "frozen": -1}[mode_r]
    return left, right


def _coupled_sparse(ctx: AcousticContext, a_iface: np.ndarray, a_cell: np.ndarray, dt: float,
                    bc: BoundaryPolicy):
    """Generic sparse assembly of the coupled (u, pi) update.

    Unknowns are ordered ``[u_0..u_{n-1}, pi_0..pi_{n-1}]``. Used for periodic
    boundaries and as an independent check of the block-tridiagonal path.
    """
    n = ctx.n
    left, right = _interface_refs(n, bc)
    a = a_iface
    # (cell refs, is_pi, coefficient in u*, coefficient in pi*); frozen ghosts carry no increment
    slots = [
        (left, False, 0.5 * np.ones_like(a), a / 2),
        (right, False, 0.5 * np.ones_like(a), -a / 2),
        (left, True, 1.0 / (2 * a), 0.5 * np.ones_like(a)),
        (right, True, -1.0 / (2 * a), 0.5 * np.ones_like(a)),
    ]
    u_n, pi_n, rhs_u, rhs_pi = _coupled_defect(ctx, a_iface, a_cell, dt, bc)
    rows, cols, vals = [np.arange(2 * n)], [np.arange(2 * n)], [np.ones(2 * n)]
    iface = np.arange(n + 1)
    for cell_of_row, sign in ((iface - 1, 1.0), (iface, -1.0)):
        valid = (cell_of_row >= 0) & (cell_of_row < n)
        i = iface[valid]
        c = cell_of_row[valid]
        w_u = sign * dt / ctx.dm[c]
        w_pi = sign * dt / ctx.dm[c] * a_cell[c] ** 2
        for refs, is_pi, cu, cp in slots:
            ref = refs[i]
            keep = ref >= 0
            var = ref + (n if is_pi else 0)
            # u-rows see pi*, pi-rows see u*
            for row_off, weight, coef in ((0, w_u, cp[i]), (n, w_pi, cu[i])):
                rows.append(c[keep] + row_off)
                cols.append(var[keep])
                vals.append((weight * coef)[keep])
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(2 * n, 2 * n)).tocsc()
    sol = spla.spsolve(mat, np.concatenate([rhs_u, rhs_pi]))
    return u_n + sol[:n], pi_n + sol[n:]


@numba.njit(cache=True)
def _block_thomas(r_u, r_pi, dm, a, a_cell, dt, left_mode, right_mode):
    """Block-tridiagonal (2x2) elimination of the coupled (u, pi) increment rows.

    Row c couples cell c to c-1 through interface c and to c+1 through
    interface c+1. Ghost modes: 0 copy, 1 frozen (zero increment).
    """
    n = r_u.size
    # blocks: D (diag), Lo (to c-1), Up (to c+1) as 2x2 with order (u, pi)
    D = np.zeros((n, 2, 2))
    Lo = np.zeros((n, 2, 2))
    Up = np.zeros((n, 2, 2))
    r = np.zeros((n, 2))
    for c in range(n):
        lam = dt / dm[c]
        aL = a[c]
        aR = a[c + 1]
        A2 = a_cell[c] * a_cell[c]
        D[c, 0, 0] = 1.0 + lam * (aL + aR) / 2
        D[c, 1, 1] = 1.0 + lam * A2 * (1.0 / (2 * aR) + 1.0 / (2 * aL))
        Up[c, 0, 0] = -lam * aR / 2
        Up[c, 0, 1] = lam / 2
        Up[c, 1, 0] = lam * A2 / 2
        Up[c, 1, 1] = -lam * A2 / (2 * aR)
        Lo[c, 0, 0] = -lam * aL / 2
        Lo[c, 0, 1] = -lam / 2
        Lo[c, 1, 0] = -lam * A2 / 2
        Lo[c, 1, 1] = -lam * A2 / (2 * aL)
        r[c, 0] = r_u[c]
        r[c, 1] = r_pi[c]
    # copy ghosts follow the adjacent unknown
    if left_mode == 0:
        D[0] += Lo[0]
    if right_mode == 0:
        D[n - 1] += Up[n - 1]
    # forward elimination
    for c in range(1, n):
        p = D[c - 1]
        det = p[0, 0] * p[1, 1] - p[0, 1] * p[1, 0]
        inv00 = p[1, 1] / det
        inv01 = -p[0, 1] / det
        inv10 = -p[1, 0] / det
        inv11 = p[0, 0] / det
        # m = Lo[c] @ inv(D[c-1])
        m00 = Lo[c, 0, 0] * inv00 + Lo[c, 0, 1] * inv10
        m01 = Lo[c, 0, 0] * inv01 + Lo[c, 0, 1] * inv11
        m10 = Lo[c, 1, 0] * inv00 + Lo[c, 1, 1] * inv10
        m11 = Lo[c, 1, 0] * inv01 + Lo[c, 1, 1] * inv11
        up = Up[c - 1]
        D[c, 0, 0] -= m00 * up[0, 0] + m01 * up[1, 0]
        D[c, 0, 1] -= m00 * up[0, 1] + m01 * up[1, 1]
        D[c, 1, 0] -= m10 * up[0, 0] + m11 * up[1, 0]
        D[c, 1, 1] -= m10 * up[0, 1] + m11 * up[1, 1]
        r0 = r[c - 1, 0]
        r1 = r[c - 1, 1]
        r[c, 0] -= m00 * r0 + m01 * r1
        r[c, 1] -= m10 * r0 + m11 * r1
    # back substitution
    u = np.empty(n)
    pi = np.empty(n)
    x0 = 0.0
    x1 = 0.0
    for c in range(n - 1, -1, -1):
        b0 = r[c, 0]
        b1 = r[c, 1]
        if c < n - 1:
            b0 -= Up[c, 0, 0] * x0 + Up[c, 0, 1] * x1
            b1 -= Up[c, 1, 0] * x0 + Up[c, 1, 1] * x1
        p = D[c]
        det = p[0, 0] * p[1, 1] - p[0, 1] * p[1, 0]
        x0 = (p[1, 1] * b0 - p[0, 1] * b1) / det
        x1 = (p[0, 0] * b1 - p[1, 0] * b0) / det
        u[c] = x0
        pi[c] = x1
    return u, pi


def coupled_solve(ctx: AcousticContext, a_iface: np.ndarray, a_cell: np.ndarray, dt: float, bc: BoundaryPolicy,
                  sparse: bool = False):
    """Solve the coupled (u, pi) implicit update with per-interface speeds.

    Each row couples a cell to its two neighbours only: the system is
    block-tridiagonal and is eliminated directly, except with periodic
    boundaries (or ``sparse=True``) where a sparse LU solve is used.
    """
    if sparse or bc.is_periodic:
        return _coupled_sparse(ctx, a_iface, a_cell, dt, bc)
    a_iface = np.asarray(a_iface, float)
    a_cell = np.asarray(a_cell, float)
    u_n, pi_n, r_u, r_pi = _coupled_defect(ctx, a_iface, a_cell, dt, bc)
    modes = {"copy": 0, "frozen": 1}
    du, dpi = _block_thomas(r_u, r_pi, ctx.dm, a_iface, a_cell, float(dt), modes[implicit_ghost_mode(bc.left)],
                            modes[implicit_ghost_mode(bc.right)])
    return u_n + du, pi_n + dpi


def implicit_acoustic_step(state: FlowState, grid: Grid1D, speeds: InterfaceSpeeds, dt: float, g: float,
                           bc: BoundaryPolicy, ctx: AcousticContext | None = None,
                           backend: str = "auto") -> AcousticStepOutput:
    """Advance the acoustic step implicitly; raises StepRejected if some L_j <= 0."""
    if ctx is None:
        ctx = acoustic_context(state, grid, g, bc)
    if backend == "auto":
        backend = "characteristic" if speeds.uniform else "coupled"
    a_cell = speeds.cell_speed()
    if backend == "characteristic":
        if not speeds.uniform:
            raise ValueError("the characteristic backend needs a uniform relaxation speed")
        u_minus, pi_minus = characteristic_solve(ctx, float(speeds.a[0]), dt, bc)
    elif backend == "coupled":
        u_minus, pi_minus = coupled_solve(ctx, speeds.a, a_cell, dt, bc)
    else:
        raise ValueError(f"unknown implicit backend {backend!r}")
    u_ext = extend_implicit(u_minus, ctx.u_ext, bc)
    pi_ext = extend_implicit(pi_minus, ctx.pi_ext, bc)
    u_star, pi_star = interface_fluxes(u_ext[:-1], u_ext[1:], pi_ext[:-1], pi_ext[1:], speeds.a, ctx.m_jump)
    out = _finish(ctx, speeds, dt, u_star, pi_star, u_minus, pi_minus,
                  pi_minus + a_cell * u_minus, pi_minus - a_cell * u_minus, implicit=True)
    bad = np.flatnonzero(~(out.L > 0.0))
    if bad.size:
        j = int(bad[np.argmin(out.L[bad])])
        raise StepRejected(f"implicit step gave L_j = {out.L[j]!r} in cell {j}", cell=j)
    return out
