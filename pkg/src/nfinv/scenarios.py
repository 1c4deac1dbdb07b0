"""Synthetic true models, random-field backgrounds, and noise injection.

Case 1: square low-velocity block in a uniform background (slowness).
Case 2: elliptical target over a correlated random background (slowness).
Case 3: conductive dipping dike under a surface layer (log10 conductivity).
Case 4: the dike over a background whose conductivity decreases linearly
        with depth (log10 conductivity).

Geometry parameters the source material never pins down (block placement,
dike width, layer thickness, random-field statistics) are explicit
arguments with documented defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nfinv.mesh import TensorMesh


@dataclass(frozen=True)
class GrfSpec:
    """Stationary Gaussian random field with Gaussian covariance.

    cov(h) = variance * exp(-(hx/len_x)^2 - (hz/len_z)^2)
    """

    variance: float
    len_x: float
    len_z: float
    seed: int = 0


@dataclass(frozen=True)
class EllipseSpec:
    """Elliptical velocity target; center in width/depth fractions."""

    cx_frac: float = 0.5
    cz_frac: float = 0.4
    rx_m: float = 12.0
    rz_m: float = 20.0
    velocity: float = 400.0


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian data noise and the matching uncertainty weights.

    absolute_gaussian: std in data units; W_d = (1/std) I, so uniform
    uncertainties act as an identity weighting up to scale.
    relative_gaussian: per-datum std = rel_fraction * |d| + floor.
    """

    kind: str = "absolute_gaussian"
    std: float = 0.0
    rel_fraction: float = 0.0
    floor: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("absolute_gaussian", "relative_gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.std < 0 or self.rel_fraction < 0 or self.floor < 0:
            raise ValueError("noise parameters must be non-negative")


def gaussian_random_field(nx: int, nz: int, dx: float, dz: float,
                          spec: GrfSpec) -> np.ndarray:
    """Mean-zero field on the core grid via FFT spectral synthesis.

    The covariance is embedded on an enlarged torus (double the grid, at
    least six correlation lengths) so the crop carries no wraparound
    correlation; small negative eigenvalues of the embedding are clipped.
    Returns nx*nz values, row-major with x fastest.
    """
    if spec.len_x <= 0 or spec.len_z <= 0:
        raise ValueError("correlation lengths must be positive")
    if spec.variance < 0:
        raise ValueError("variance must be non-negative")
    if spec.variance == 0.0:
        return np.zeros(nx * nz)

    ex = max(2 * nx, nx + int(np.ceil(6 * spec.len_x / dx)))
    ez = max(2 * nz, nz + int(np.ceil(6 * spec.len_z / dz)))

    # torus distances on the embedding grid
    hx = np.arange(ex) * dx
    hx = np.minimum(hx, ex * dx - hx)
    hz = np.arange(ez) * dz
    hz = np.minimum(hz, ez * dz - hz)
    qx = (hx / spec.len_x) ** 2
    qz = (hz / spec.len_z) ** 2
    cov = spec.variance * np.exp(-(qz[:, None] + qx[None, :]))

    spectrum = np.fft.fft2(cov).real
    spectrum = np.maximum(spectrum, 0.0)

    rng = np.random.default_rng(spec.seed)
    n_tot = ex * ez
    eps = rng.standard_normal((ez, ex)) + 1j * rng.standard_normal((ez, ex))
    field = np.fft.ifft2(eps * np.sqrt(spectrum / n_tot)).real * n_tot
    return field[:nz, :nx].ravel()


def _core_center_grids(mesh: TensorMesh):
    xs = mesh.x_centers[mesh.n_pad:mesh.n_pad + mesh.nx_core]
    zs = mesh.z_centers[:mesh.nz_core]
    x0, x1 = mesh.core_x_extent
    gx, gz = np.meshgrid(xs - x0, zs)  # x relative to core-left, z from surface
    return gx, gz


def make_case1(mesh: TensorMesh, background_velocity: float = 1000.0,
               block_velocity: float = 200.0,
               block_center_frac: tuple[float, float] = (0.5, 0.35),
               block_side_frac: float = 0.375) -> np.ndarray:
    """Square slow block in a uniform background; returns slowness (s/m).

    Placement defaults are width/depth fractions of the core region; the
    side length is a fraction of the core width.
    """
    gx, gz = _core_center_grids(mesh)
    width = mesh.nx_core * mesh.dx_core
    depth = mesh.nz_core * mesh.dz_core
    cx = block_center_frac[0] * width
    cz = block_center_frac[1] * depth
    half = 0.5 * block_side_frac * width
    v = np.full(gx.shape, background_velocity)
    inside = (np.abs(gx - cx) <= half) & (np.abs(gz - cz) <= half)
    v[inside] = block_velocity
    return (1.0 / v).ravel()


def make_case2(mesh: TensorMesh, grf: GrfSpec,
               ellipse: EllipseSpec = EllipseSpec(),
               background_velocity: float = 1000.0,
               min_velocity: float = 50.0) -> np.ndarray:
    """Elliptical target over a correlated velocity background (slowness).

    The random field perturbs velocity additively; values are floored at
    ``min_velocity`` to keep slowness finite and positive.
    """
    gx, gz = _core_center_grids(mesh)
    width = mesh.nx_core * mesh.dx_core
    depth = mesh.nz_core * mesh.dz_core
    field = gaussian_random_field(mesh.nx_core, mesh.nz_core,
                                  mesh.dx_core, mesh.dz_core, grf)
    v = background_velocity + field.reshape(gz.shape)
    cx = ellipse.cx_frac * width
    cz = ellipse.cz_frac * depth
    inside = (((gx - cx) / ellipse.rx_m) ** 2
              + ((gz - cz) / ellipse.rz_m) ** 2) <= 1.0
    v[inside] = ellipse.velocity
    v = np.maximum(v, min_velocity)
    return (1.0 / v).ravel()


def _dike_mask(gx: np.ndarray, gz: np.ndarray, dip_angle_deg: float,
               x_top: float, z_top: float, z_bottom: float,
               width: float) -> np.ndarray:
    if not 0.0 < dip_angle_deg <= 90.0:
        raise ValueError(f"dip angle must be in (0, 90], got {dip_angle_deg}")
    dip = np.radians(dip_angle_deg)
    # center line walks +x with depth for dips below 90 degrees
    if dip_angle_deg == 90.0:
        x_center = np.full(gz.shape, x_top)
    else:
        x_center = x_top + (gz - z_top) / np.tan(dip)
    in_depth = (gz >= z_top) & (gz <= z_bottom)
    return in_depth & (np.abs(gx - x_center) <= width / 2)


def make_case3(mesh: TensorMesh, dip_angle_deg: float = 45.0,
               layer_thickness: float = 25.0,
               layer_sigma: float = 0.02,
               dike_sigma: float = 0.1,
               dike_depth: float = 125.0,
               dike_width: float = 50.0,
               dike_x_frac: float = 0.5,
               background_sigma: float = 0.01) -> np.ndarray:
    """Conductive dike under a surface layer; returns log10 conductivity.

    The dike runs from the layer base down to ``dike_depth`` at the given
    dip angle (degrees from horizontal; 90 is vertical).
    """
    gx, gz = _core_center_grids(mesh)
    width = mesh.nx_core * mesh.dx_core
    m = np.full(gx.shape, np.log10(background_sigma))
    dike = _dike_mask(gx, gz, dip_angle_deg, dike_x_frac * width,
                      layer_thickness, dike_depth, dike_width)
    m[dike] = np.log10(dike_sigma)
    m[gz < layer_thickness] = np.log10(layer_sigma)
    return m.ravel()


def make_case4(mesh: TensorMesh, dip_angle_deg: float = 45.0,
               sigma_top: float = 0.02, sigma_bottom: float = 0.001,
               dike_sigma: float = 0.1, dike_top: float = 25.0,
               dike_depth: float = 125.0, dike_width: float = 50.0,
               dike_x_frac: float = 0.5) -> np.ndarray:
    """Dike over a graded background; returns log10 conductivity.

    The background conductivity is linear in depth across core rows:
    the surface row sits at ``sigma_top``, the bottom core row at
    ``sigma_bottom``.
    """
    gx, gz = _core_center_grids(mesh)
    width = mesh.nx_core * mesh.dx_core
    nz = mesh.nz_core
    rows = np.arange(nz, dtype=float)
    frac = rows / (nz - 1) if nz > 1 else np.zeros(1)
    sigma_rows = sigma_top + (sigma_bottom - sigma_top) * frac
    m = np.log10(np.broadcast_to(sigma_rows[:, None], gx.shape)).copy()
    dike = _dike_mask(gx, gz, dip_angle_deg, dike_x_frac * width,
                      dike_top, dike_depth, dike_width)
    m[dike] = np.log10(dike_sigma)
    return m.ravel()


def add_noise(data: np.ndarray, spec: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Gaussian noise plus the diagonal of W_d (1/uncertainty).

    With std = 0 the data pass through unchanged and the weights come from
    the floor value.
    """
    data = np.asarray(data, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ValueError("data must be finite")
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "absolute_gaussian":
        unc = np.full(data.shape, spec.std if spec.std > 0 else spec.floor)
        noisy = data + rng.normal(0.0, spec.std, data.shape) \
            if spec.std > 0 else data.copy()
    else:
        unc = spec.rel_fraction * np.abs(data) + spec.floor
        noisy = data + rng.standard_normal(data.shape) * unc
    if np.any(unc <= 0):
        raise ValueError("uncertainties must be positive; set std or floor")
    return noisy, 1.0 / unc
