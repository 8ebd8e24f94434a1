"""Semi-implicit time stepping of the mixed P1 scheme.

One step advances the pair (u, H) through the coupled variational system

    <u - u_prev, chi> = k*lambda1*<H, chi> + k*lambda2*<grad H, grad chi>
                        - k*gamma*<u x H, chi> + k*<conv(u), chi>
                        + k*<M_R(u_prev), chi> + <G(u_prev), chi>*dW,
    <H, phi>          = -<grad u, grad phi> + <f_R(u_prev), phi>,

for all P1 test functions chi, phi.  The truncated force, the mass source
and the noise coefficient are explicit (frozen at the previous solution);
the linear fourth-order part and the cross terms are implicit.  The
nonlinear system is solved by Picard iteration that lags u in the two
bilinear terms (u_lag x H and beta2 * u_lag x (nu.grad)u), assembling and
factorising a block sparse matrix per iterate.  When gamma = beta2 = 0 the
system is linear and a single factorisation per step size is reused for the
whole run.

Picard is a fixed-slope iteration: its contraction factor scales like
k*gamma*|H|, so it can diverge for coarse time steps even though the step
system remains solvable.  ``SolverConfig.method="auto"`` (the default)
therefore falls back to a damped-free Newton linearisation of the same
system when Picard stalls; "picard" and "newton" force one method.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import assembly, kernels, physics
from .fields import FeField, operators


class PicardDiverged(RuntimeError):
    """Nonlinear iteration failed to reach tolerance within the budget."""

    def __init__(self, step_index, history, note=""):
        self.step_index = step_index
        self.history = list(history)
        tail = ", ".join("%.3e" % d for d in self.history[-6:])
        msg = (f"nonlinear iteration diverged at step {step_index} "
               f"(last update norms: {tail}){note}; try a smaller time step")
        super().__init__(msg)


class LinearSolveFailed(RuntimeError):
    """Sparse factorisation or solve of the step system failed."""


@dataclass
class SolverConfig:
    """Tolerances and strategy for the per-step nonlinear solve.

    ``picard_tol`` bounds the L2 norm of consecutive u-iterate differences;
    ``method`` is "picard", "newton", or "auto" (Picard with Newton
    fallback).
    """

    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    linear_tol: float = 1e-12
    method: str = "auto"

    def __post_init__(self):
        if self.picard_tol <= 0 or self.linear_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("picard", "newton", "auto"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SchemeState:
    """Discrete trajectory point: step index, time and the two fields."""

    n: int
    t: float
    u: FeField
    H: FeField
    iterations: int = 0
    method: str = ""


@dataclass
class RunStats:
    """Diagnostics accumulated along a trajectory."""

    n_steps: int = 0
    max_point_norm: float = 0.0
    total_iterations: int = 0
    newton_steps: int = 0


class SchemeWorkspace:
    """Operators and samples shared by every step on one mesh.

    Holds the blocked mass/stiffness/convection matrices (interleaved
    node-major ordering), the noise field sampled once at the quadrature
    points, and cached factorisations for the linear regime.
    """

    def __init__(self, mesh, params, noise=None):
        self.mesh = mesh
        self.params = params
        self.noise = noise
        self.md = assembly.mesh_data(mesh)
        ops = operators(mesh)
        self.ops = ops
        eye3 = sparse.identity(3, format="csr")
        self.M = ops.mass.mat
        self.M3 = sparse.kron(self.M, eye3, format="csr")
        self.K3 = sparse.kron(ops.stiffness.mat, eye3, format="csr")
        self.n_block = 3 * mesh.n_vertices

        nu_q = None
        if callable(params.nu):
            pts = self.md.quad_points.reshape(-1, mesh.dim)
            nu_q = np.asarray(params.nu(pts), dtype=np.float64).reshape(
                mesh.n_cells, self.md.nq, mesh.dim)
        else:
            nu_vec = params.nu_vector(mesh.dim)
            if np.any(nu_vec != 0.0):
                nu_q = np.broadcast_to(
                    nu_vec, (mesh.n_cells, self.md.nq, mesh.dim))
        if nu_q is not None:
            self.nu_dot_grad = np.ascontiguousarray(
                np.einsum("cqd,cld->cql", nu_q, self.md.grads))
            conv = assembly.assemble_convection(mesh, self.nu_dot_grad)
            self.B3 = sparse.kron(conv.mat, eye3, format="csr")
        else:
            self.nu_dot_grad = None
            self.B3 = None

        if noise is not None:
            pts = self.md.quad_points.reshape(-1, mesh.dim)
            self.g_quad = np.ascontiguousarray(
                np.asarray(noise.g(pts), dtype=np.float64).reshape(
                    mesh.n_cells, self.md.nq, 3))
        else:
            self.g_quad = None
        self._linear_lu = {}

    def eval_quad(self, coeffs):
        return kernels.eval_p1(self.mesh.cells, self.md.basis, coeffs)

    def load(self, values_at_quad):
        return kernels.load_vector(self.mesh.cells, self.md.basis,
                                   self.md.weights, values_at_quad,
                                   self.mesh.n_vertices)

    def l2_norm(self, coeffs):
        return float(np.sqrt(np.sum(coeffs * (self.M @ coeffs))))

    def is_linear_step(self):
        return self.params.gamma == 0.0 and self.params.beta2 == 0.0

    def linear_lu(self, k):
        lu = self._linear_lu.get(k)
        if lu is None:
            mat = self._system_matrix(k, None)
            lu = _factorize(mat)
            self._linear_lu[k] = lu
        return lu

    def _system_matrix(self, k, u_lag_quad):
        p = self.params
        a00 = self.M3
        if self.B3 is not None and p.beta1 != 0.0:
            a00 = a00 - (k * p.beta1) * self.B3
        if p.beta2 != 0.0 and self.nu_dot_grad is not None:
            x = assembly.assemble_weighted_cross_convection(
                self.mesh, u_lag_quad, self.nu_dot_grad)
            a00 = a00 - (k * p.beta2) * x
        a01 = (-k * p.lambda1) * self.M3 + (-k * p.lambda2) * self.K3
        if p.gamma != 0.0:
            c = assembly.assemble_weighted_cross(self.mesh, u_lag_quad)
            a01 = a01 + (k * p.gamma) * c
        return sparse.bmat([[a00, a01], [self.K3, self.M3]], format="csc")


def _factorize(mat):
    try:
        return splu(mat)
    except RuntimeError as exc:
        raise LinearSolveFailed(str(exc)) from exc


def initial_effective_field(u0: FeField, params) -> FeField:
    """Effective field consistent with the mixed relation at the start:
    <H, phi> = -<grad u0, grad phi> + <f_R(u0), phi>."""
    ops = operators(u0.mesh)
    md = assembly.mesh_data(u0.mesh)
    uq = kernels.eval_p1(u0.mesh.cells, md.basis, u0.coeffs)
    load_f = kernels.load_vector(u0.mesh.cells, md.basis, md.weights,
                                 physics.truncated_force(uq, params),
                                 u0.mesh.n_vertices)
    rhs = load_f - ops.stiffness.mat @ u0.coeffs
    return FeField(u0.mesh, ops.mass_lu().solve(rhs))


def step(prev: SchemeState, dW: float, k: float, params, config: SolverConfig,
         workspace: SchemeWorkspace) -> SchemeState:
    """Advance one time step of size k driven by the Wiener increment dW."""
    if k <= 0.0:
        raise ValueError("time step k must be positive")
    ws = workspace
    u_prev = prev.u.coeffs
    upq = ws.eval_quad(u_prev)

    rhs_h = ws.load(physics.truncated_force(upq, params)).ravel()
    rhs_u = ws.M3 @ u_prev.ravel()
    if params.mass_source is not None:
        rhs_u = rhs_u + k * ws.load(
            physics.truncated_mass_source(upq, params)).ravel()
    if ws.g_quad is not None:
        g_vals = ws.noise.evaluate(upq, ws.g_quad)
        rhs_u = rhs_u + dW * ws.load(g_vals).ravel()
    rhs = np.concatenate([rhs_u, rhs_h])

    n_new = prev.n + 1
    if ws.is_linear_step():
        sol = ws.linear_lu(k).solve(rhs)
        return _make_state(ws, n_new, k, sol, 1, "picard")

    history = []
    if config.method in ("picard", "auto"):
        sol, iters = _picard(ws, k, params, config, u_prev, rhs, history)
        if sol is not None:
            return _make_state(ws, n_new, k, sol, iters, "picard")
        if config.method == "picard":
            raise PicardDiverged(n_new, history)

    newton_hist = []
    sol, iters = _newton(ws, k, params, config, u_prev, rhs, rhs_h, newton_hist)
    if sol is None:
        note = " (Newton fallback also failed)" if history else ""
        raise PicardDiverged(n_new, history + newton_hist, note=note)
    return _make_state(ws, n_new, k, sol, iters, "newton")


def _make_state(ws, n, k, sol, iters, method):
    nb = ws.n_block
    u = FeField(ws.mesh, sol[:nb].reshape(-1, 3))
    h = FeField(ws.mesh, sol[nb:].reshape(-1, 3))
    return SchemeState(n=n, t=n * k, u=u, H=h, iterations=iters, method=method)


def _picard(ws, k, params, config, u_prev, rhs, history):
    nb = ws.n_block
    u_lag = u_prev
    sol = None
    for m in range(config.picard_max_iters):
        mat = ws._system_matrix(k, ws.eval_quad(u_lag))
        sol = _factorize(mat).solve(rhs)
        u_new = sol[:nb].reshape(-1, 3)
        delta = ws.l2_norm(u_new - u_lag)
        history.append(delta)
        if not np.isfinite(delta):
            return None, m + 1
        if delta < config.picard_tol:
            return sol, m + 1
        if m >= 2 and delta > 1e3 * max(history[0], 1e-300):
            return None, m + 1  # clearly diverging, stop early
        u_lag = u_new
    return None, config.picard_max_iters


def _newton(ws, k, params, config, u_prev, rhs, rhs_h, history):
    nb = ws.n_block
    p = params
    u = u_prev.copy()
    # consistent start for H: <H, phi> = -<grad u, grad phi> + <f_R(u_prev), phi>
    h = ws.ops.mass_lu().solve(
        rhs_h.reshape(-1, 3) - ws.ops.stiffness.mat @ u)
    for m in range(config.picard_max_iters):
        uq = ws.eval_quad(u)
        hq = ws.eval_quad(h)
        f1 = ws.M3 @ u.ravel() \
            - (k * p.lambda1) * (ws.M3 @ h.ravel()) \
            - (k * p.lambda2) * (ws.K3 @ h.ravel()) \
            - rhs[:nb]
        if ws.B3 is not None and p.beta1 != 0.0:
            f1 -= (k * p.beta1) * (ws.B3 @ u.ravel())
        j00 = ws.M3
        if ws.B3 is not None and p.beta1 != 0.0:
            j00 = j00 - (k * p.beta1) * ws.B3
        j01 = (-k * p.lambda1) * ws.M3 + (-k * p.lambda2) * ws.K3
        if p.gamma != 0.0:
            f1 += (k * p.gamma) * ws.load(np.cross(uq, hq)).ravel()
            j00 = j00 - (k * p.gamma) * assembly.assemble_weighted_cross(
                ws.mesh, hq)
            j01 = j01 + (k * p.gamma) * assembly.assemble_weighted_cross(
                ws.mesh, uq)
        if p.beta2 != 0.0 and ws.nu_dot_grad is not None:
            wq = np.einsum("cql,clk->cqk", ws.nu_dot_grad,
                           u[ws.mesh.cells])
            f1 -= (k * p.beta2) * ws.load(np.cross(uq, wq)).ravel()
            j00 = j00 + (k * p.beta2) * assembly.assemble_weighted_cross(
                ws.mesh, wq)
            j00 = j00 - (k * p.beta2) * \
                assembly.assemble_weighted_cross_convection(
                    ws.mesh, uq, ws.nu_dot_grad)
        f2 = ws.M3 @ h.ravel() + ws.K3 @ u.ravel() - rhs_h
        jac = sparse.bmat([[j00, j01], [ws.K3, ws.M3]], format="csc")
        dx = _factorize(jac).solve(-np.concatenate([f1, f2]))
        du = dx[:nb].reshape(-1, 3)
        u = u + du
        h = h + dx[nb:].reshape(-1, 3)
        delta = ws.l2_norm(du)
        history.append(delta)
        if not np.isfinite(delta):
            return None, m + 1
        if delta < config.picard_tol:
            return np.concatenate([u.ravel(), h.ravel()]), m + 1
    return None, config.picard_max_iters


def scheme_residual(prev: SchemeState, new: SchemeState, dW, k, params,
                    workspace: SchemeWorkspace):
    """L2 dual norms of both equations at the accepted step.

    Returns (r_u, r_H): the first residual tests the evolution equation with
    the cross terms evaluated at the accepted u (no lag), the second tests
    the effective-field relation.  Both are norms of the Riesz representer,
    i.e. sqrt(r^T M^{-1} r) per component.
    """
    ws = workspace
    p = params
    u = new.u.coeffs
    h = new.H.coeffs
    upq = ws.eval_quad(prev.u.coeffs)
    uq = ws.eval_quad(u)
    hq = ws.eval_quad(h)
    r1 = ws.M3 @ (u - prev.u.coeffs).ravel() \
        - (k * p.lambda1) * (ws.M3 @ h.ravel()) \
        - (k * p.lambda2) * (ws.K3 @ h.ravel())
    if p.gamma != 0.0:
        r1 += (k * p.gamma) * ws.load(np.cross(uq, hq)).ravel()
    if ws.B3 is not None and p.beta1 != 0.0:
        r1 -= (k * p.beta1) * (ws.B3 @ u.ravel())
    if p.beta2 != 0.0 and ws.nu_dot_grad is not None:
        wq = np.einsum("cql,clk->cqk", ws.nu_dot_grad, u[ws.mesh.cells])
        r1 -= (k * p.beta2) * ws.load(np.cross(uq, wq)).ravel()
    if params.mass_source is not None:
        r1 -= k * ws.load(physics.truncated_mass_source(upq, params)).ravel()
    if ws.g_quad is not None:
        r1 -= dW * ws.load(ws.noise.evaluate(upq, ws.g_quad)).ravel()
    r2 = ws.M3 @ h.ravel() + ws.K3 @ u.ravel() \
        - ws.load(physics.truncated_force(upq, params)).ravel()

    def dual_norm(r):
        rr = r.reshape(-1, 3)
        return float(np.sqrt(np.sum(rr * ws.ops.mass_lu().solve(rr))))

    return dual_norm(r1), dual_norm(r2)


def run_trajectory(u0: FeField, increments, T, params, config=None,
                   noise=None, observer=None, workspace=None):
    """Run the scheme for N = len(increments) steps of size k = T/N.

    The observer, if given, is called as observer(n, t, u, H) once with the
    initial state (H taken consistent with the mixed relation at u0) and
    then after every step; it must not mutate the fields.  Returns the final
    state and accumulated :class:`RunStats`.
    """
    increments = np.asarray(increments, dtype=np.float64)
    n_steps = increments.shape[0]
    config = config or SolverConfig()
    ws = workspace or SchemeWorkspace(u0.mesh, params, noise)
    state = SchemeState(n=0, t=0.0, u=u0,
                        H=initial_effective_field(u0, params))
    stats = RunStats(n_steps=n_steps,
                     max_point_norm=u0.max_pointwise_norm())
    if observer is not None:
        observer(state.n, state.t, state.u, state.H)
    if n_steps == 0:
        return state, stats
    k = T / n_steps
    for n in range(n_steps):
        state = step(state, float(increments[n]), k, params, config, ws)
        stats.max_point_norm = max(stats.max_point_norm,
                                   state.u.max_pointwise_norm())
        stats.total_iterations += state.iterations
        if state.method == "newton":
            stats.newton_steps += 1
        if observer is not None:
            observer(state.n, state.t, state.u, state.H)
    return state, stats
