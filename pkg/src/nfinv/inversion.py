"""Objective assembly and the inversion drivers.

Two solvers share the physics interface (predict / gradient / jvp):

* the reparameterized inversion, where a coordinate network produces the
  model and Adam updates its weights through a surrogate loss built from
  the frozen data-misfit gradient, and
* conventional model-space inversion, gradient descent (tomography) or
  inexact Gauss-Newton with optional IRLS sparse norms (DC resistivity).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from nfinv.errors import SolverError
from nfinv.neural_field import Mlp, forward, get_weights, save_checkpoint, set_weights, vjp


def data_misfit(w_d, d_obs: np.ndarray,
                d_pred: np.ndarray) -> tuple[float, np.ndarray]:
    """0.5 || W_d (d_obs - d_pred) ||^2 and its gradient w.r.t. d_pred.

    ``w_d`` is the diagonal of W_d (scalar or per-datum array).  The
    returned cotangent is -W_d^T W_d (d_obs - d_pred), ready for chaining
    through a forward map's adjoint.
    """
    d_obs = np.asarray(d_obs, dtype=float)
    d_pred = np.asarray(d_pred, dtype=float)
    if d_obs.shape != d_pred.shape:
        raise ValueError("observed and predicted data sizes differ")
    w = np.broadcast_to(np.asarray(w_d, dtype=float), d_obs.shape)
    r = d_obs - d_pred
    value = 0.5 * float(np.sum((w * r) ** 2))
    return value, -(w * w) * r


@dataclass(frozen=True)
class CoolingSchedule:
    """Exponential trade-off decay beta(t) = exp(-t / tau), beta(0) = 1."""

    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def beta(self, t: float) -> float:
        return float(np.exp(-t / self.tau))


def beta(t: float, schedule: CoolingSchedule) -> float:
    if t < 0:
        raise ValueError("epoch index must be >= 0")
    return schedule.beta(t)


@dataclass(frozen=True)
class RegularizationConfig:
    """Smallness plus directional smoothness with per-term norm exponents.

    Exponents below 2 are handled by iteratively reweighted least squares
    with stabilization (r^2 + eps^2)^(p/2 - 1); p = 0 uses the same limit
    form.  ``sensitivity_weighting`` asks the conventional driver to fold
    probed forward-sensitivity weights into all terms.
    """

    alpha_s: float = 0.0
    alpha_x: float = 0.0
    alpha_z: float = 0.0
    p_s: float = 2.0
    p_x: float = 2.0
    p_z: float = 2.0
    m_ref: float = 0.0
    irls_epsilon: float = 1e-4
    sensitivity_weighting: bool = False

    def __post_init__(self):
        if min(self.alpha_s, self.alpha_x, self.alpha_z) < 0:
            raise ValueError("term weights must be non-negative")
        for p in (self.p_s, self.p_x, self.p_z):
            if not 0.0 <= p <= 2.0:
                raise ValueError(f"norm exponent must lie in [0, 2], got {p}")
        if (min(self.p_s, self.p_x, self.p_z) < 2.0
                and self.irls_epsilon <= 0):
            raise ValueError("p < 2 requires irls_epsilon > 0")


def _difference_operator(nx: int, nz: int, dx: float, dz: float):
    """First-difference operators over the core grid, scaled by spacing."""
    n = nx * nz
    idx = np.arange(n).reshape(nz, nx)
    # d/dx: faces between x-neighbors
    i = idx[:, :-1].ravel()
    j = idx[:, 1:].ravel()
    rows = np.repeat(np.arange(len(i)), 2)
    cols = np.column_stack([i, j]).ravel()
    vals = np.tile([-1.0 / dx, 1.0 / dx], len(i))
    Dx = sp.coo_matrix((vals, (rows, cols)), shape=(len(i), n)).tocsr()
    # d/dz: faces between z-neighbors
    i = idx[:-1, :].ravel()
    j = idx[1:, :].ravel()
    rows = np.repeat(np.arange(len(i)), 2)
    cols = np.column_stack([i, j]).ravel()
    vals = np.tile([-1.0 / dz, 1.0 / dz], len(i))
    Dz = sp.coo_matrix((vals, (rows, cols)), shape=(len(i), n)).tocsr()
    return Dx, Dz


class Regularization:
    """Evaluates the penalty, its gradient, and its (IRLS) Hessian."""

    def __init__(self, config: RegularizationConfig, nx: int, nz: int,
                 dx: float, dz: float):
        self.config = config
        self.n = nx * nz
        self.volume = dx * dz  # uniform core cells
        self.Dx, self.Dz = _difference_operator(nx, nz, dx, dz)
        self.epsilon = config.irls_epsilon
        self.w_s = np.ones(self.n)
        self.w_x = np.ones(self.Dx.shape[0])
        self.w_z = np.ones(self.Dz.shape[0])
        self.cell_weights = np.ones(self.n)
        self._face_weights()

    def _face_weights(self):
        # face weights average the two adjacent cell weights
        pattern_x = (self.Dx != 0).astype(float)
        pattern_z = (self.Dz != 0).astype(float)
        self.face_w_x = (pattern_x @ self.cell_weights) / 2.0
        self.face_w_z = (pattern_z @ self.cell_weights) / 2.0

    def set_cell_weights(self, w: np.ndarray) -> None:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n,):
            raise ValueError(f"need {self.n} cell weights, got {w.shape}")
        self.cell_weights = w
        self._face_weights()

    @staticmethod
    def _irls_weight(r: np.ndarray, p: float, eps: float) -> np.ndarray:
        if p == 2.0:
            return np.ones_like(r)
        return (r * r + eps * eps) ** (p / 2.0 - 1.0)

    def update_irls(self, m: np.ndarray) -> None:
        """Refresh IRLS weights at the current model (no-op for p = 2)."""
        c = self.config
        r_s = m - c.m_ref
        self.w_s = self._irls_weight(r_s, c.p_s, self.epsilon)
        self.w_x = self._irls_weight(self.Dx @ m, c.p_x, self.epsilon)
        self.w_z = self._irls_weight(self.Dz @ m, c.p_z, self.epsilon)

    def cool_epsilon(self, factor: float = 0.5, floor: float = 1e-6) -> None:
        self.epsilon = max(self.epsilon * factor, floor)

    def value_and_grad(self, m: np.ndarray) -> tuple[float, np.ndarray]:
        c = self.config
        v = self.volume
        value = 0.0
        grad = np.zeros_like(m)
        if c.alpha_s > 0:
            r = m - c.m_ref
            w = v * self.cell_weights * self.w_s
            value += c.alpha_s * float(np.sum(w * r * r))
            grad += 2.0 * c.alpha_s * w * r
        if c.alpha_x > 0:
            r = self.Dx @ m
            w = v * self.face_w_x * self.w_x
            value += c.alpha_x * float(np.sum(w * r * r))
            grad += 2.0 * c.alpha_x * (self.Dx.T @ (w * r))
        if c.alpha_z > 0:
            r = self.Dz @ m
            w = v * self.face_w_z * self.w_z
            value += c.alpha_z * float(np.sum(w * r * r))
            grad += 2.0 * c.alpha_z * (self.Dz.T @ (w * r))
        return value, grad

    def hessian(self) -> sp.csr_matrix:
        """Hessian of the weighted-quadratic form at the current weights."""
        c = self.config
        v = self.volume
        H = sp.csr_matrix((self.n, self.n))
        if c.alpha_s > 0:
            H = H + sp.diags(2.0 * c.alpha_s * v * self.cell_weights * self.w_s)
        if c.alpha_x > 0:
            W = sp.diags(2.0 * c.alpha_x * v * self.face_w_x * self.w_x)
            H = H + self.Dx.T @ W @ self.Dx
        if c.alpha_z > 0:
            W = sp.diags(2.0 * c.alpha_z * v * self.face_w_z * self.w_z)
            H = H + self.Dz.T @ W @ self.Dz
        return H.tocsr()


class Adam:
    """Adam on a flat parameter vector, bias-corrected moments."""

    def __init__(self, n_params: int, learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, w: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (g * g)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return w - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class InversionResult:
    """Recovered model plus per-epoch traces."""

    model: np.ndarray
    misfit_history: np.ndarray
    beta_history: np.ndarray
    reg_history: np.ndarray
    wall_clock: np.ndarray
    converged: bool
    final_misfit: float
    status: str = "ok"
    checkpoints: list = field(default_factory=list)
    weights: np.ndarray | None = None

    @property
    def n_epochs(self) -> int:
        return len(self.misfit_history)


def nfs_invert(simulator, d_obs: np.ndarray, w_d, mlp: Mlp, Z,
               epochs: int, schedule: CoolingSchedule | None = None,
               adam: Adam | None = None, reg: Regularization | None = None,
               target_misfit: float | None = None,
               checkpoint_every: int = 0, checkpoint_dir=None,
               snapshot_every: int = 0) -> InversionResult:
    """Optimize the network weights against the physics (Adam, surrogate loss).

    Per epoch: cool the trade-off, predict the model from the network,
    evaluate the data misfit and its model-space gradient through the
    physics adjoint, then backpropagate
    (1 - beta) * J_v + beta * grad phi_m(m) through the network only and
    take one Adam step.  With no schedule, beta is 0 throughout (the
    tomography configuration).
    """
    if adam is None:
        adam = Adam(mlp.param_count)
    w = get_weights(mlp)
    misfits, betas, regs, clocks = [], [], [], []
    checkpoints = []
    converged = False

    for t in range(1, epochs + 1):
        t0 = time.perf_counter()
        beta_t = schedule.beta(t) if schedule is not None else 0.0
        m = forward(mlp, Z)
        d_pred = simulator.predict(m)
        phi_d, cot = data_misfit(w_d, d_obs, d_pred)
        if not np.isfinite(phi_d):
            if checkpoint_dir is not None:
                save_checkpoint(f"{checkpoint_dir}/diagnostic.ckpt", mlp, t)
            raise SolverError(f"non-finite misfit at epoch {t}")

        phi_m = 0.0
        g_m = (1.0 - beta_t) * simulator.gradient(cot)
        if reg is not None and beta_t != 0.0:
            reg.update_irls(m)
            phi_m, g_reg = reg.value_and_grad(m)
            g_m = g_m + beta_t * g_reg

        misfits.append(phi_d)
        betas.append(beta_t)
        regs.append(phi_m)
        if snapshot_every and t % snapshot_every == 0:
            checkpoints.append((t, m.copy()))
        if checkpoint_every and checkpoint_dir is not None \
                and t % checkpoint_every == 0:
            save_checkpoint(f"{checkpoint_dir}/epoch_{t:06d}.ckpt", mlp, t)
        if target_misfit is not None and phi_d <= target_misfit:
            clocks.append(time.perf_counter() - t0)
            converged = True
            break

        g_w = vjp(mlp, Z, g_m)
        w = adam.step(w, g_w)
        set_weights(mlp, w)
        clocks.append(time.perf_counter() - t0)

    model = forward(mlp, Z)
    final_misfit, _ = data_misfit(w_d, d_obs, simulator.predict(model))
    return InversionResult(
        model=model,
        misfit_history=np.array(misfits),
        beta_history=np.array(betas),
        reg_history=np.array(regs),
        wall_clock=np.array(clocks),
        converged=converged,
        final_misfit=final_misfit,
        checkpoints=checkpoints,
        weights=get_weights(mlp),
    )


def estimate_sensitivity_weights(simulator, w_d, n_model: int,
                                 n_probes: int = 8, seed: int = 0,
                                 floor_frac: float = 1e-3) -> np.ndarray:
    """Cell weights from the probed diagonal of J^T W^2 J, max-normalized.

    Rademacher probing: E[(J^T W z)_c^2] equals the diagonal entry.  The
    square root of the normalized diagonal is used as the weight, floored
    at ``floor_frac`` of its maximum.
    """
    rng = np.random.default_rng(seed)
    diag = np.zeros(n_model)
    w = np.asarray(w_d, dtype=float)
    for _ in range(n_probes):
        z = rng.choice([-1.0, 1.0], size=simulator.n_data)
        y = simulator.gradient(np.broadcast_to(w, z.shape) * z)
        diag += y * y
    diag /= n_probes
    weights = np.sqrt(diag)
    weights /= weights.max()
    return np.maximum(weights, floor_frac)


def _power_iteration_step(hv, n: int, iters: int = 12, seed: int = 0) -> float:
    """Largest eigenvalue estimate of a symmetric PSD operator."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        u = hv(v)
        lam = float(v @ u)
        norm = np.linalg.norm(u)
        if norm == 0:
            return 1.0
        v = u / norm
    return max(lam, 1e-300)


def conventional_invert(simulator, d_obs: np.ndarray, w_d, m0: np.ndarray,
                        reg: Regularization | None = None,
                        optimizer: str = "gradient_descent", *,
                        max_iterations: int = 200,
                        beta0: float = 1.0,
                        beta_cooling: float = 1.0,
                        target_misfit: float | None = None,
                        gn_cg_maxiter: int = 20,
                        gn_cg_rtol: float = 1e-3,
                        irls_cooling: float = 0.5,
                        irls_epsilon_floor: float = 1e-6,
                        sens_seed: int = 0,
                        snapshot_every: int = 0) -> InversionResult:
    """Model-space inversion from a reference starting model.

    gradient_descent: fixed initial step (from a Lipschitz power-iteration
    estimate) with Armijo backtracking.
    gauss_newton: inexact Newton with conjugate-gradient inner solves on
    J^T W^2 J + beta * H_reg, a backtracking line search, multiplicative
    beta cooling between outer iterations, and IRLS weight refreshes (with
    epsilon cooling) when any norm exponent is below 2.
    """
    if optimizer not in ("gradient_descent", "gauss_newton"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    m = np.asarray(m0, dtype=float).copy()
    w = np.asarray(w_d, dtype=float)
    beta_t = beta0
    misfits, betas, regs, clocks = [], [], [], []
    checkpoints = []
    converged = False
    status = "ok"

    use_irls = reg is not None and min(reg.config.p_s, reg.config.p_x,
                                       reg.config.p_z) < 2.0

    d_pred = simulator.predict(m)
    if reg is not None and reg.config.sensitivity_weighting:
        reg.set_cell_weights(estimate_sensitivity_weights(
            simulator, w, len(m), seed=sens_seed))

    def objective(model, d_pred_model=None):
        if d_pred_model is None:
            d_pred_model = simulator.predict(model)
        phi_d, cot = data_misfit(w, d_obs, d_pred_model)
        phi_m, g_m = (0.0, 0.0)
        if reg is not None:
            phi_m, g_m = reg.value_and_grad(model)
        return phi_d, phi_m, cot, g_m

    step0 = None
    for it in range(1, max_iterations + 1):
        t0 = time.perf_counter()
        if it > 1:
            d_pred = simulator.predict(m)
        if use_irls:
            reg.update_irls(m)
            if it > 1:
                reg.cool_epsilon(irls_cooling, irls_epsilon_floor)
        phi_d, phi_m, cot, g_reg = objective(m, d_pred)
        if not np.isfinite(phi_d):
            raise SolverError(f"non-finite misfit at iteration {it}")
        misfits.append(phi_d)
        betas.append(beta_t)
        regs.append(phi_m)
        if snapshot_every and it % snapshot_every == 0:
            checkpoints.append((it, m.copy()))
        if target_misfit is not None and phi_d <= target_misfit:
            clocks.append(time.perf_counter() - t0)
            converged = True
            break

        grad = simulator.gradient(cot) + beta_t * g_reg
        total0 = phi_d + beta_t * phi_m

        if optimizer == "gradient_descent":
            if step0 is None:
                def hv(v):
                    hd = simulator.gradient((w * w) * simulator.jvp(v))
                    if reg is not None and beta_t != 0:
                        hd = hd + beta_t * (reg.hessian() @ v)
                    return hd
                step0 = 1.0 / _power_iteration_step(hv, len(m), seed=1)
            direction = -grad
            step = step0
        else:
            h_reg = reg.hessian() if reg is not None else None

            def gn_matvec(v):
                out = simulator.gradient((w * w) * simulator.jvp(v))
                if h_reg is not None and beta_t != 0:
                    out = out + beta_t * (h_reg @ v)
                return out

            op = spla.LinearOperator((len(m), len(m)), matvec=gn_matvec)
            delta, _info = spla.cg(op, -grad, rtol=gn_cg_rtol,
                                   maxiter=gn_cg_maxiter)
            direction = delta
            step = 1.0

        # Armijo backtracking on the total objective
        slope = float(grad @ direction)
        if slope >= 0:  # CG returned a non-descent direction; fall back
            direction = -grad
            slope = -float(grad @ grad)
            step = step0 if step0 is not None else 1.0
        accepted = False
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(30):
                trial = m + step * direction
                phi_d_t, _ = data_misfit(w, d_obs, simulator.predict(trial))
                phi_m_t = reg.value_and_grad(trial)[0] if reg is not None else 0.0
                if phi_d_t + beta_t * phi_m_t <= total0 + 1e-4 * step * slope:
                    accepted = True
                    break
                step *= 0.5
        if not accepted:
            status = "line_search_failed"
            clocks.append(time.perf_counter() - t0)
            break
        m = m + step * direction
        if optimizer == "gradient_descent":
            step0 = min(step * 2.0, step0 * 64)
        beta_t /= beta_cooling
        clocks.append(time.perf_counter() - t0)

    final_misfit, _ = data_misfit(w, d_obs, simulator.predict(m))
    return InversionResult(
        model=m,
        misfit_history=np.array(misfits),
        beta_history=np.array(betas),
        reg_history=np.array(regs),
        wall_clock=np.array(clocks),
        converged=converged,
        final_misfit=final_misfit,
        status=status,
        checkpoints=checkpoints,
    )
