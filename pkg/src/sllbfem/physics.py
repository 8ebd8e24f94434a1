"""Pointwise model nonlinearities.

The driving force is the negative gradient of the double-well potential
V(u) = kappa*(|u|^2 - mu)^2 / 4, truncated outside a ball of radius R by a
C^2 radial bump so that it becomes globally Lipschitz: the bump equals 1 on
|u| <= R, vanishes on |u| >= 2R, and interpolates with a quintic smoothstep
in between.  The convective term is beta1*(nu.grad)u + beta2*u x (nu.grad)u
and the noise coefficient is G(u) = lambda1*g - gamma*u x g for a fixed
spatial vector field g.

All functions are vectorised over a leading batch axis: u has shape
(..., 3) and returns follow suit.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ModelParams:
    """Coefficients of the evolution system plus the truncation radius.

    ``nu`` is the constant spin-current vector (a scalar is promoted in 1D);
    a callable (n, dim) -> (n, dim) is also accepted for spatially varying
    currents.  ``mass_source`` is a callable u -> M(u) with at most
    quadratic growth, or None for the default zero source.
    """

    lambda1: float
    lambda2: float
    gamma: float
    kappa: float
    mu: float
    beta1: float
    beta2: float
    R: float = 10.0
    nu: object = 0.0
    mass_source: object = None

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "gamma", "kappa", "mu",
                     "beta1", "beta2", "R"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and nonnegative")
            setattr(self, name, value)
        if self.R <= 0.0:
            raise ValueError("truncation radius R must be positive")

    def nu_vector(self, dim):
        """Constant current as a (dim,) array; None if nu is a callable."""
        if callable(self.nu):
            return None
        nu = np.atleast_1d(np.asarray(self.nu, dtype=np.float64))
        if nu.size != dim:
            raise ValueError(f"nu must have {dim} components")
        return nu

    def nu_sup_norm(self, dim):
        """Recorded sup norm of the current (diagnostic only)."""
        nu = self.nu_vector(dim)
        return float(np.abs(nu).max()) if nu is not None else float("nan")


@dataclass
class NoiseCoefficient:
    """Multiplicative noise G(u) = lambda1*g - gamma*(u x g)."""

    g: object  # vectorised callable (n, dim) -> (n, 3)
    lambda1: float
    gamma: float

    @classmethod
    def from_params(cls, g, params):
        return cls(g=g, lambda1=params.lambda1, gamma=params.gamma)

    def evaluate(self, u, g_vals):
        return self.lambda1 * g_vals - self.gamma * np.cross(u, g_vals)


def potential(u, kappa, mu):
    """Double-well density kappa*(|u|^2 - mu)^2 / 4."""
    u = np.asarray(u, dtype=np.float64)
    r2 = (u * u).sum(axis=-1)
    return 0.25 * kappa * (r2 - mu) ** 2


def gl_force(u, kappa, mu):
    """Ginzburg-Landau force kappa*mu*u - kappa*|u|^2*u = -grad potential."""
    u = np.asarray(u, dtype=np.float64)
    r2 = (u * u).sum(axis=-1, keepdims=True)
    return kappa * (mu - r2) * u


def _smoothstep(t):
    # quintic with vanishing first and second derivatives at t=0 and t=1
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def bump(u, R):
    """C^2 radial cutoff: exactly 1 for |u| <= R, exactly 0 for |u| >= 2R."""
    if R <= 0.0:
        raise ValueError("R must be positive")
    u = np.asarray(u, dtype=np.float64)
    r = np.sqrt((u * u).sum(axis=-1))
    t = np.clip((r - R) / R, 0.0, 1.0)
    out = 1.0 - _smoothstep(t)
    # force the flat regions to exact constants
    return np.where(r <= R, 1.0, np.where(r >= 2.0 * R, 0.0, out))


def truncated_force(u, params):
    """bump(u, R) * gl_force(u); equals the untruncated force on |u| <= R."""
    u = np.asarray(u, dtype=np.float64)
    phi = bump(u, params.R)
    return phi[..., None] * gl_force(u, params.kappa, params.mu)


def _bump_radial_derivative(r, R):
    t = (r - R) / R
    inside = (t > 0.0) & (t < 1.0)
    ts = np.where(inside, t, 0.5)
    ds = 30.0 * ts * ts * (1.0 - ts) ** 2  # d/dt of the smoothstep
    return np.where(inside, -ds / R, 0.0)


def truncated_force_jacobian(u, params):
    """Exact pointwise Jacobian of :func:`truncated_force`, shape (..., 3, 3)."""
    u = np.asarray(u, dtype=np.float64)
    kappa, mu, R = params.kappa, params.mu, params.R
    r2 = (u * u).sum(axis=-1)
    r = np.sqrt(r2)
    eye = np.eye(3)
    # D f = kappa*(mu - |u|^2) I - 2 kappa u u^T
    df = (kappa * (mu - r2))[..., None, None] * eye \
        - 2.0 * kappa * u[..., :, None] * u[..., None, :]
    phi = bump(u, R)
    dphi_dr = _bump_radial_derivative(r, R)
    rs = np.where(r > 0.0, r, 1.0)
    grad_phi = (dphi_dr / rs)[..., None] * u  # zero whenever dphi_dr is zero
    f = gl_force(u, kappa, mu)
    return f[..., :, None] * grad_phi[..., None, :] + phi[..., None, None] * df


def convective(u, grad_u, params):
    """beta1*(nu.grad)u + beta2*u x (nu.grad)u from the gradient columns.

    ``grad_u`` has shape (..., 3, dim) with column i holding the spatial
    derivative along coordinate i; ``nu`` must be the constant current.
    """
    u = np.asarray(u, dtype=np.float64)
    grad_u = np.asarray(grad_u, dtype=np.float64)
    nu = params.nu_vector(grad_u.shape[-1])
    w = grad_u @ nu
    return params.beta1 * w + params.beta2 * np.cross(u, w)


def truncated_mass_source(u, params):
    """bump(u, R) * mass_source(u); identically zero for the default source."""
    u = np.asarray(u, dtype=np.float64)
    if params.mass_source is None:
        return np.zeros_like(u)
    phi = bump(u, params.R)
    return phi[..., None] * np.asarray(params.mass_source(u), dtype=np.float64)


def noise_coefficient(u, g_at_x, params):
    """G(u) = lambda1*g - gamma*(u x g) at one or many points."""
    u = np.asarray(u, dtype=np.float64)
    g = np.asarray(g_at_x, dtype=np.float64)
    return params.lambda1 * g - params.gamma * np.cross(u, g)
