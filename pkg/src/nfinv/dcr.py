"""2D finite-volume DC resistivity: forward solves and adjoint gradients.

Discretizes div(sigma grad phi) = -q with cell-centered finite volumes on a
tensor mesh.  Face conductances use harmonic averaging of conductivity
(series half-cell resistances), the top boundary is no-flux (ground
surface) and the left/right/bottom boundaries hold phi = 0, so the system
matrix is symmetric positive definite.

Physics is a pure 2D line source: currents are amperes per meter of strike
and the uniform half-space potential is phi = -(rho I / pi) ln r + C.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from nfinv.errors import GeometryError, SolverError
from nfinv.mesh import TensorMesh

log = logging.getLogger(__name__)

LN10 = np.log(10.0)


@dataclass(frozen=True)
class DcrSurvey:
    """Surface dipole-dipole geometry.

    ``src_dipoles`` holds (A, B) electrode-index pairs; ``rx_dipoles[i]``
    lists the (M, N) pairs measured for source i.  Datum ordering follows
    sources in order, then that source's receivers in order.
    """

    electrode_x: np.ndarray
    src_dipoles: tuple[tuple[int, int], ...]
    rx_dipoles: tuple[tuple[tuple[int, int], ...], ...]
    current: float = 1.0  # A per meter of strike (line source)

    @property
    def n_data(self) -> int:
        return sum(len(r) for r in self.rx_dipoles)


def build_dipole_dipole_survey(line_length: float, station_sep: float,
                               max_rx: int, x0: float = 0.0,
                               current: float = 1.0) -> DcrSurvey:
    """Standard dipole-dipole enumeration along a surface line.

    Electrodes at x0 + k * station_sep.  Each adjacent pair (i, i+1)
    transmits; receiver dipoles (j, j+1) start one station beyond B and
    walk outward, at most ``max_rx`` of them.
    """
    if station_sep <= 0 or line_length <= 0:
        raise ValueError("line_length and station_sep must be positive")
    if max_rx < 1:
        raise ValueError("max_rx must be >= 1")
    n_elec = int(np.floor(line_length / station_sep + 1e-9)) + 1
    xs = x0 + np.arange(n_elec) * station_sep

    src, rx = [], []
    for i in range(n_elec - 1):
        pairs = []
        for j in range(i + 2, min(i + 2 + max_rx, n_elec - 1)):
            pairs.append((j, j + 1))
        if pairs:
            src.append((i, i + 1))
            rx.append(tuple(pairs))
    if not src:
        warnings.warn(f"line of {n_elec} electrodes yields no dipole-dipole "
                      "data", stacklevel=2)
    return DcrSurvey(xs, tuple(src), tuple(rx), current)


def _face_geometry(mesh: TensorMesh):
    """Interior face and Dirichlet boundary-face descriptors.

    Returns (fi, fj, area, di, dj) for interior faces and (bc, b_area,
    b_dist) for the phi = 0 ghost faces on the left/right/bottom sides.
    """
    nx, nz = mesh.nx_full, mesh.nz_full
    wx, wz = mesh.x_widths, mesh.z_widths
    idx = np.arange(nx * nz).reshape(nz, nx)

    # x-oriented faces (neighbors in x)
    fi_x = idx[:, :-1].ravel()
    fj_x = idx[:, 1:].ravel()
    a_x = np.repeat(wz, nx - 1)
    di_x = np.tile(wx[:-1] / 2, nz)
    dj_x = np.tile(wx[1:] / 2, nz)

    # z-oriented faces (neighbors in z)
    fi_z = idx[:-1, :].ravel()
    fj_z = idx[1:, :].ravel()
    a_z = np.tile(wx, nz - 1)
    di_z = np.repeat(wz[:-1] / 2, nx)
    dj_z = np.repeat(wz[1:] / 2, nx)

    fi = np.concatenate([fi_x, fi_z])
    fj = np.concatenate([fj_x, fj_z])
    area = np.concatenate([a_x, a_z])
    di = np.concatenate([di_x, di_z])
    dj = np.concatenate([dj_x, dj_z])

    # Dirichlet ghost faces: left, right, bottom (top is no-flux)
    bc = np.concatenate([idx[:, 0], idx[:, -1], idx[-1, :]])
    b_area = np.concatenate([wz, wz, wx])
    b_dist = np.concatenate([np.full(nz, wx[0] / 2),
                             np.full(nz, wx[-1] / 2),
                             np.full(nx, wz[-1] / 2)])
    return fi, fj, area, di, dj, bc, b_area, b_dist


@dataclass
class FvSystem:
    """Assembled conductance Laplacian with a reusable factorization."""

    mesh: TensorMesh
    sigma: np.ndarray
    L: sp.csr_matrix
    _lu: spla.SuperLU = field(repr=False)
    _geom: tuple = field(repr=False)
    # per-survey forward cache, filled by dcr_predict
    _phi: np.ndarray | None = field(default=None, repr=False)
    _phi_survey: DcrSurvey | None = field(default=None, repr=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Direct solve with residual check and an iterative fallback."""
        x = self._lu.solve(b)
        bn = np.linalg.norm(b, axis=0)
        res = np.linalg.norm(self.L @ x - b, axis=0)
        bad = res > 1e-8 * np.maximum(bn, 1e-300)
        if np.any(bad):
            x2 = np.atleast_2d(x.T).T.copy()
            b2 = np.atleast_2d(b.T).T
            for k in np.flatnonzero(np.atleast_1d(bad)):
                xk, info = spla.cg(self.L, b2[:, k], x0=x2[:, k], rtol=1e-10,
                                   maxiter=10 * self.L.shape[0])
                if info != 0:
                    raise SolverError(
                        f"FV solve failed: direct residual "
                        f"{np.max(res / np.maximum(bn, 1e-300)):.3e}, cg info {info}")
                x2[:, k] = xk
            x = x2.reshape(x.shape)
        return x


def assemble_system(mesh: TensorMesh, sigma: np.ndarray) -> FvSystem:
    """Build and factorize the FV operator for a full-mesh conductivity."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (mesh.n_cells,):
        raise ValueError(f"sigma must have {mesh.n_cells} entries, "
                         f"got {sigma.shape}")
    if np.any(sigma <= 0):
        raise ValueError("conductivity must be positive everywhere")

    fi, fj, area, di, dj, bc, b_area, b_dist = geom = _face_geometry(mesh)
    g = area / (di / sigma[fi] + dj / sigma[fj])
    gb = b_area * sigma[bc] / b_dist

    rows = np.concatenate([fi, fj, fi, fj, bc])
    cols = np.concatenate([fi, fj, fj, fi, bc])
    vals = np.concatenate([g, g, -g, -g, gb])
    L = sp.coo_matrix((vals, (rows, cols)),
                      shape=(mesh.n_cells, mesh.n_cells)).tocsr()
    try:
        lu = spla.splu(L.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc
    return FvSystem(mesh=mesh, sigma=sigma, L=L, _lu=lu, _geom=geom)


def electrode_cells(mesh: TensorMesh, survey: DcrSurvey) -> np.ndarray:
    """Snap electrodes to the nearest core surface-cell centers.

    Raises GeometryError when an electrode lies outside the core region.
    Snap distances are logged at debug level.
    """
    x_lo, x_hi = mesh.core_x_extent
    core_cols = np.arange(mesh.n_pad, mesh.n_pad + mesh.nx_core)
    centers = mesh.x_centers[core_cols]
    cells = np.empty(len(survey.electrode_x), dtype=int)
    for k, ex in enumerate(survey.electrode_x):
        if not (x_lo - 1e-9 <= ex <= x_hi + 1e-9):
            raise GeometryError(
                f"electrode at x={ex} outside core extent [{x_lo}, {x_hi}]")
        j = int(np.argmin(np.abs(centers - ex)))
        cells[k] = core_cols[j]  # surface row, iz = 0
        snap = abs(centers[j] - ex)
        if snap > 1e-9:
            log.debug("electrode %d snapped %.3f m to x=%.2f", k, snap,
                      centers[j])
    return cells


def _ensure_forward(system: FvSystem, survey: DcrSurvey) -> np.ndarray:
    if system._phi is not None and system._phi_survey is survey:
        return system._phi
    cells = electrode_cells(system.mesh, survey)
    n = system.mesh.n_cells
    B = np.zeros((n, len(survey.src_dipoles)))
    for s, (ia, ib) in enumerate(survey.src_dipoles):
        B[cells[ia], s] += survey.current
        B[cells[ib], s] -= survey.current
    phi = system.solve(B)
    system._phi = phi
    system._phi_survey = survey
    return phi


def dcr_predict(system: FvSystem, survey: DcrSurvey) -> np.ndarray:
    """Potential differences phi(M) - phi(N) in volts, one solve per source."""
    phi = _ensure_forward(system, survey)
    cells = electrode_cells(system.mesh, survey)
    out = np.empty(survey.n_data)
    k = 0
    for s in range(len(survey.src_dipoles)):
        for (im, in_) in survey.rx_dipoles[s]:
            out[k] = phi[cells[im], s] - phi[cells[in_], s]
            k += 1
    return out


def _conductance_derivs(system: FvSystem):
    """dg/dsigma on both sides of every face at the current conductivity."""
    fi, fj, area, di, dj, bc, b_area, b_dist = system._geom
    sigma = system.sigma
    den = di / sigma[fi] + dj / sigma[fj]
    g = area / den
    dg_i = g * g * di / (area * sigma[fi] ** 2)
    dg_j = g * g * dj / (area * sigma[fj] ** 2)
    dgb = b_area / b_dist
    return fi, fj, bc, dg_i, dg_j, dgb


def _adjoint_rhs(system: FvSystem, survey: DcrSurvey,
                 cotangent: np.ndarray) -> np.ndarray:
    cells = electrode_cells(system.mesh, survey)
    n = system.mesh.n_cells
    R = np.zeros((n, len(survey.src_dipoles)))
    k = 0
    for s in range(len(survey.src_dipoles)):
        for (im, in_) in survey.rx_dipoles[s]:
            R[cells[im], s] += cotangent[k]
            R[cells[in_], s] -= cotangent[k]
            k += 1
    return R


def dcr_gradient(system: FvSystem, survey: DcrSurvey,
                 cotangent: np.ndarray) -> np.ndarray:
    """Adjoint-state gradient of (cotangent . data) w.r.t. log10-conductivity.

    One adjoint solve per source; the chain rule runs through
    sigma = 10**m on active cells only (padding is frozen), so the result
    has one entry per active cell.
    """
    cotangent = np.asarray(cotangent, dtype=float)
    if cotangent.shape != (survey.n_data,):
        raise ValueError(f"cotangent must have length {survey.n_data}")
    phi = _ensure_forward(system, survey)
    lam = system.solve(_adjoint_rhs(system, survey, cotangent))

    fi, fj, bc, dg_i, dg_j, dgb = _conductance_derivs(system)
    # sum over sources of (lam_i - lam_j)(phi_i - phi_j) per face
    wf = np.einsum("fs,fs->f", lam[fi] - lam[fj], phi[fi] - phi[fj])
    wb = np.einsum("fs,fs->f", lam[bc], phi[bc])

    grad_sigma = np.zeros(system.mesh.n_cells)
    np.add.at(grad_sigma, fi, wf * dg_i)
    np.add.at(grad_sigma, fj, wf * dg_j)
    np.add.at(grad_sigma, bc, wb * dgb)
    grad_sigma *= -1.0

    act = system.mesh.active_indices
    return grad_sigma[act] * system.sigma[act] * LN10


def dcr_jvp(system: FvSystem, survey: DcrSurvey, dm: np.ndarray) -> np.ndarray:
    """Directional derivative of the data w.r.t. active log10-conductivity."""
    dm = np.asarray(dm, dtype=float)
    act = system.mesh.active_indices
    if dm.shape != (len(act),):
        raise ValueError(f"dm must have {len(act)} entries, got {dm.shape}")
    phi = _ensure_forward(system, survey)

    dsigma = np.zeros(system.mesh.n_cells)
    dsigma[act] = system.sigma[act] * LN10 * dm

    fi, fj, bc, dg_i, dg_j, dgb = _conductance_derivs(system)
    dg = dg_i * dsigma[fi] + dg_j * dsigma[fj]
    dgb_full = dgb * dsigma[bc]

    # R = (dL) Phi, then dPhi = -L^{-1} R
    R = np.zeros_like(phi)
    flux = dg[:, None] * (phi[fi] - phi[fj])
    np.add.at(R, fi, flux)
    np.add.at(R, fj, -flux)
    np.add.at(R, bc, dgb_full[:, None] * phi[bc])
    dphi = -system.solve(R)

    cells = electrode_cells(system.mesh, survey)
    out = np.empty(survey.n_data)
    k = 0
    for s in range(len(survey.src_dipoles)):
        for (im, in_) in survey.rx_dipoles[s]:
            out[k] = dphi[cells[im], s] - dphi[cells[in_], s]
            k += 1
    return out


class DcrSimulator:
    """Nonlinear forward map over active-cell log10-conductivity.

    ``predict`` reassembles and refactorizes the FV system for the given
    model; ``gradient``/``jvp`` linearize at the most recent predict.
    """

    def __init__(self, mesh: TensorMesh, survey: DcrSurvey,
                 background_sigma: float):
        if background_sigma <= 0:
            raise ValueError("background conductivity must be positive")
        self.mesh = mesh
        self.survey = survey
        self.background_sigma = background_sigma
        self._system: FvSystem | None = None
        electrode_cells(mesh, survey)  # validate geometry up front

    @property
    def n_data(self) -> int:
        return self.survey.n_data

    @property
    def n_model(self) -> int:
        return self.mesh.n_active

    def predict(self, m: np.ndarray) -> np.ndarray:
        from nfinv.mesh import embed_core
        sigma_full = embed_core(self.mesh, 10.0 ** np.asarray(m, dtype=float),
                                self.background_sigma)
        self._system = assemble_system(self.mesh, sigma_full)
        return dcr_predict(self._system, self.survey)

    def gradient(self, cotangent: np.ndarray) -> np.ndarray:
        if self._system is None:
            raise SolverError("gradient requested before any predict")
        return dcr_gradient(self._system, self.survey, cotangent)

    def jvp(self, dm: np.ndarray) -> np.ndarray:
        if self._system is None:
            raise SolverError("jvp requested before any predict")
        return dcr_jvp(self._system, self.survey, dm)


def apparent_resistivity(survey: DcrSurvey, data: np.ndarray) -> np.ndarray:
    """2D line-source apparent resistivity for plotting.

    Uses the half-plane geometric factor: dV = (rho I / pi)
    ln(r_BM r_AN / (r_AM r_BN)).
    """
    xs = survey.electrode_x
    out = np.empty(survey.n_data)
    k = 0
    for s, (ia, ib) in enumerate(survey.src_dipoles):
        for (im, in_) in survey.rx_dipoles[s]:
            r_am = abs(xs[im] - xs[ia])
            r_bm = abs(xs[im] - xs[ib])
            r_an = abs(xs[in_] - xs[ia])
            r_bn = abs(xs[in_] - xs[ib])
            geom = np.log(r_bm * r_an / (r_am * r_bn))
            out[k] = np.pi * data[k] / (survey.current * geom)
            k += 1
    return out


def write_dcr_data_csv(path, survey: DcrSurvey, data_v: np.ndarray,
                       uncertainty_v: np.ndarray,
                       include_apparent_resistivity: bool = True) -> None:
    """Columns: A_x, B_x, M_x, N_x, dV_volts, uncertainty_volts[, rho_app]."""
    unc = np.broadcast_to(np.asarray(uncertainty_v, dtype=float),
                          np.shape(data_v))
    rho = apparent_resistivity(survey, data_v) \
        if include_apparent_resistivity else None
    xs = survey.electrode_x
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        header = ["A_x", "B_x", "M_x", "N_x", "dV_volts", "uncertainty_volts"]
        if rho is not None:
            header.append("rho_app_ohm_m")
        w.writerow(header)
        k = 0
        for s, (ia, ib) in enumerate(survey.src_dipoles):
            for (im, in_) in survey.rx_dipoles[s]:
                row = [repr(float(xs[ia])), repr(float(xs[ib])),
                       repr(float(xs[im])), repr(float(xs[in_])),
                       repr(float(data_v[k])), repr(float(unc[k]))]
                if rho is not None:
                    row.append(repr(float(rho[k])))
                w.writerow(row)
                k += 1


def read_dcr_data_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (dV_volts, uncertainty_volts) from a DCR data file."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))[1:]
    d = np.array([float(r[4]) for r in rows])
    u = np.array([float(r[5]) for r in rows])
    return d, u
