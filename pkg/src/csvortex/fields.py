"""Grid domains, scalar fields, and the shared differential/integral kernels.

Two domain kinds are supported:

- ``torus``: a doubly periodic cell [0, L1) x [0, L2), nodes x_i = i*L1/N1.
  Derivatives are spectral (Fourier multipliers), so the Laplacian annihilates
  constants exactly and Poisson problems invert in one FFT pair.
- ``box``: the square [-L, L]^2 truncating the plane, cell-centered nodes
  x_i = -L + (i+1/2)*h with h = 2L/N.  Derivatives are 2nd-order finite
  differences with zero Dirichlet ghost values just outside the grid.

All kernels are pure functions of immutable inputs; fields can be shared
read-only across threads.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.fft import dstn, fftn, idstn, ifftn

from .errors import DomainError, NonFiniteFieldError

_KIND_TORUS = 0
_KIND_BOX = 1


@dataclass(frozen=True)
class GridDomain:
    """Discretized torus or truncated-plane box.

    For ``kind == "torus"`` the extents are the periods (L1, L2); for
    ``kind == "box"`` both extents equal the half-width L and the grid covers
    [-L, L]^2 with cell-centered nodes.
    """

    kind: str
    n1: int
    n2: int
    extent1: float
    extent2: float

    def __post_init__(self):
        if self.kind not in ("torus", "box"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.n1 < 16 or self.n2 < 16:
            raise DomainError("grid resolution must be at least 16 per axis")
        if self.n1 % 2 or self.n2 % 2:
            raise DomainError("grid resolution must be even per axis")
        if self.extent1 <= 0 or self.extent2 <= 0:
            raise DomainError("domain extents must be positive")
        if self.kind == "box" and self.extent1 != self.extent2:
            raise DomainError("box domain is square: extents must match")

    @staticmethod
    def torus(l1: float, l2: float, n1: int, n2: int) -> "GridDomain":
        return GridDomain("torus", n1, n2, float(l1), float(l2))

    @staticmethod
    def box(half_width: float, n: int) -> "GridDomain":
        return GridDomain("box", n, n, float(half_width), float(half_width))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def h1(self) -> float:
        if self.kind == "torus":
            return self.extent1 / self.n1
        return 2.0 * self.extent1 / self.n1

    @property
    def h2(self) -> float:
        if self.kind == "torus":
            return self.extent2 / self.n2
        return 2.0 * self.extent2 / self.n2

    @property
    def cell_area(self) -> float:
        return self.h1 * self.h2

    @property
    def area(self) -> float:
        """|Omega| for the torus; (2L)^2 for the box."""
        if self.kind == "torus":
            return self.extent1 * self.extent2
        return (2.0 * self.extent1) ** 2

    def coords(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays (X, Y), shape (n1, n2), 'ij' indexing."""
        if self.kind == "torus":
            x = self.h1 * np.arange(self.n1)
            y = self.h2 * np.arange(self.n2)
        else:
            x = -self.extent1 + self.h1 * (np.arange(self.n1) + 0.5)
            y = -self.extent2 + self.h2 * (np.arange(self.n2) + 0.5)
        return np.meshgrid(x, y, indexing="ij")

    def contains(self, x: float, y: float) -> bool:
        if self.kind == "torus":
            return 0.0 <= x < self.extent1 and 0.0 <= y < self.extent2
        return abs(x) < self.extent1 and abs(y) < self.extent2


@dataclass(frozen=True)
class ScalarField:
    """A real scalar grid function tied to its domain."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.domain.shape:
            raise DomainError(
                f"field shape {v.shape} does not match domain {self.domain.shape}"
            )
        object.__setattr__(self, "values", v)

    def check_finite(self) -> "ScalarField":
        bad = ~np.isfinite(self.values)
        if bad.any():
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise NonFiniteFieldError(f"non-finite field value at node {node}", node=node)
        return self

    def is_mean_zero(self, rel: float = 1e-12) -> bool:
        scale = self.domain.area * max(np.max(np.abs(self.values)), 1e-300)
        return abs(integrate_values(self.values, self.domain)) <= rel * scale


def _same_domain(f: ScalarField, g: ScalarField) -> GridDomain:
    if f.domain != g.domain:
        raise DomainError("fields live on different domains")
    return f.domain


# ---------------------------------------------------------------------------
# spectral machinery (torus)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _torus_k2(n1: int, n2: int, l1: float, l2: float) -> np.ndarray:
    kx = 2.0 * np.pi * np.fft.fftfreq(n1, d=l1 / n1)
    ky = 2.0 * np.pi * np.fft.fftfreq(n2, d=l2 / n2)
    return kx[:, None] ** 2 + ky[None, :] ** 2


def _k2(domain: GridDomain) -> np.ndarray:
    return _torus_k2(domain.n1, domain.n2, domain.extent1, domain.extent2)


def laplacian_values(values: np.ndarray, domain: GridDomain) -> np.ndarray:
    """Discrete Laplacian on raw node values (zero ghosts for the box)."""
    if domain.kind == "torus":
        return np.real(ifftn(-_k2(domain) * fftn(values)))
    return _box_laplacian(values, domain.h1, domain.h2)


def _box_laplacian(values: np.ndarray, h1: float, h2: float) -> np.ndarray:
    p = np.pad(values, 1)
    return (
        (p[2:, 1:-1] - 2.0 * values + p[:-2, 1:-1]) / h1**2
        + (p[1:-1, 2:] - 2.0 * values + p[1:-1, :-2]) / h2**2
    )


def laplacian(field: ScalarField) -> ScalarField:
    """Apply the domain's Laplacian: spectral on the torus, 5-point on the box."""
    out = laplacian_values(field.values, field.domain)
    return ScalarField(field.domain, out).check_finite()


def laplacian4_values(values: np.ndarray, domain: GridDomain) -> np.ndarray:
    """Independent 4th-order centered Laplacian, for discretization-error checks.

    On the box the two outermost node rings are left zero (the stencil would
    reach past the ghost ring); callers restrict their norms accordingly.
    """
    c = (-1.0, 16.0, -30.0, 16.0, -1.0)
    if domain.kind == "torus":
        out = np.zeros_like(values)
        for axis, h in ((0, domain.h1), (1, domain.h2)):
            acc = np.zeros_like(values)
            for k, w in zip((-2, -1, 0, 1, 2), c):
                acc += w * np.roll(values, -k, axis=axis)
            out += acc / (12.0 * h**2)
        return out
    p = np.pad(values, 2)
    out = np.zeros_like(values)
    for axis, h in ((0, domain.h1), (1, domain.h2)):
        acc = np.zeros_like(values)
        for k, w in zip((-2, -1, 0, 1, 2), c):
            sl = [slice(2, -2), slice(2, -2)]
            sl[axis] = slice(2 + k, p.shape[axis] - 2 + k)
            acc += w * p[tuple(sl)]
        out += acc / (12.0 * h**2)
    out[:2, :] = out[-2:, :] = out[:, :2] = out[:, -2:] = 0.0
    return out


def integrate_values(values: np.ndarray, domain: GridDomain) -> float:
    return float(np.sum(values)) * domain.cell_area


def integrate(field: ScalarField) -> float:
    """Cell-area-weighted midpoint quadrature over the whole domain."""
    return integrate_values(field.values, field.domain)


def dirichlet_inner_values(f: np.ndarray, g: np.ndarray, domain: GridDomain) -> float:
    if domain.kind == "torus":
        fh = fftn(f)
        gh = fftn(g)
        s = np.sum(_k2(domain) * np.real(fh * np.conj(gh)))
        return float(s) * domain.cell_area / (domain.n1 * domain.n2)
    return _box_dirichlet(f, g, domain.h1, domain.h2)


def _box_dirichlet(f: np.ndarray, g: np.ndarray, h1: float, h2: float) -> float:
    pf = np.pad(f, 1)
    pg = np.pad(g, 1)
    dxf = np.diff(pf[:, 1:-1], axis=0) / h1
    dxg = np.diff(pg[:, 1:-1], axis=0) / h1
    dyf = np.diff(pf[1:-1, :], axis=1) / h2
    dyg = np.diff(pg[1:-1, :], axis=1) / h2
    return float(np.sum(dxf * dxg) + np.sum(dyf * dyg)) * h1 * h2


def dirichlet_inner(f: ScalarField, g: ScalarField) -> float:
    """Gradient inner product  ∫ ∇f·∇g.

    Computed spectrally on the torus and by forward differences (with zero
    ghosts) on the box; exactly adjoint to :func:`laplacian`, i.e.
    dirichlet_inner(f, g) == -integrate(f * laplacian(g)) to round-off.
    """
    domain = _same_domain(f, g)
    return dirichlet_inner_values(f.values, g.values, domain)


def project_mean_zero(field: ScalarField) -> ScalarField:
    """Remove the mean (torus only; the constant/mean-zero splitting is periodic)."""
    if field.domain.kind != "torus":
        raise DomainError("mean-zero projection is defined on the torus only")
    mean = integrate(field) / field.domain.area
    return ScalarField(field.domain, field.values - mean)


def poisson_solve_torus(rhs: np.ndarray, domain: GridDomain) -> np.ndarray:
    """Solve Δu = rhs on the torus with the k=0 mode pinned to zero.

    The right-hand side must have (numerically) zero mean; the returned field
    is exactly mean-zero on the grid.
    """
    if domain.kind != "torus":
        raise DomainError("spectral Poisson solve requires a torus domain")
    k2 = _k2(domain).copy()
    k2[0, 0] = 1.0
    uh = fftn(rhs) / (-k2)
    uh[0, 0] = 0.0
    return np.real(ifftn(uh))


# ---------------------------------------------------------------------------
# box ghost-ring (lifted Dirichlet data) helpers: solver-internal
# ---------------------------------------------------------------------------


def box_pad_with_ring(values: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Embed values into a padded array whose outer ring carries ``ring`` data."""
    p = ring.copy()
    p[1:-1, 1:-1] = values
    return p


def box_laplacian_ring(values: np.ndarray, ring: np.ndarray, domain: GridDomain) -> np.ndarray:
    """5-point Laplacian where the ghost ring carries prescribed boundary data."""
    p = box_pad_with_ring(values, ring)
    return (
        (p[2:, 1:-1] - 2.0 * values + p[:-2, 1:-1]) / domain.h1**2
        + (p[1:-1, 2:] - 2.0 * values + p[1:-1, :-2]) / domain.h2**2
    )


def box_dirichlet_ring(f: np.ndarray, rf: np.ndarray, g: np.ndarray, rg: np.ndarray,
                       domain: GridDomain) -> float:
    """∫ ∇f·∇g with prescribed ghost-ring data on both arguments."""
    pf = box_pad_with_ring(f, rf)
    pg = box_pad_with_ring(g, rg)
    h1, h2 = domain.h1, domain.h2
    dxf = np.diff(pf[:, 1:-1], axis=0) / h1
    dxg = np.diff(pg[:, 1:-1], axis=0) / h1
    dyf = np.diff(pf[1:-1, :], axis=1) / h2
    dyg = np.diff(pg[1:-1, :], axis=1) / h2
    return float(np.sum(dxf * dxg) + np.sum(dyf * dyg)) * h1 * h2


@lru_cache(maxsize=32)
def _dst_eigs(n1: int, n2: int, h1: float, h2: float) -> np.ndarray:
    lam1 = (4.0 / h1**2) * np.sin(np.pi * (np.arange(n1) + 1) / (2.0 * (n1 + 1))) ** 2
    lam2 = (4.0 / h2**2) * np.sin(np.pi * (np.arange(n2) + 1) / (2.0 * (n2 + 1))) ** 2
    return lam1[:, None] + lam2[None, :]


def box_shifted_inverse(values: np.ndarray, domain: GridDomain, c_lap: float,
                        c_id: float) -> np.ndarray:
    """Apply (c_lap*(-Δ_5) + c_id)^(-1) via the sine transform (zero ghosts)."""
    lam = _dst_eigs(domain.n1, domain.n2, domain.h1, domain.h2)
    vh = dstn(values, type=1, norm="ortho")
    vh /= c_lap * lam + c_id
    return idstn(vh, type=1, norm="ortho")


def torus_shifted_inverse(values: np.ndarray, domain: GridDomain, c_lap: float,
                          c_id: float) -> np.ndarray:
    """Apply (c_lap*(-Δ_spec) + c_id)^(-1) on the torus."""
    vh = fftn(values)
    vh /= c_lap * _k2(domain) + c_id
    return np.real(ifftn(vh))


# ---------------------------------------------------------------------------
# serialization: flat binary with a 16-byte header, and CSV for plotting
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<iiff")


def _kind_code(domain: GridDomain) -> Tuple[float, float]:
    if domain.kind == "torus":
        if abs(domain.h1 - domain.h2) > 1e-12 * max(domain.h1, domain.h2):
            raise DomainError(
                "binary header stores one torus extent; cell aspect must be uniform"
            )
        return float(_KIND_TORUS), domain.extent1
    return float(_KIND_BOX), domain.extent1


def write_field(path, field: ScalarField) -> None:
    """Write little-endian float64 row-major values behind a 16-byte header.

    Header: n1 (int32), n2 (int32), kind code (float32: 0 torus / 1 box),
    extent (float32: torus period L1 with L2 = L1*n2/n1, or box half-width).
    """
    kind, extent = _kind_code(field.domain)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(field.domain.n1, field.domain.n2, kind, extent))
        fh.write(field.values.astype("<f8").tobytes(order="C"))


def read_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise DomainError(f"truncated field header in {path}")
        n1, n2, kind, extent = _HEADER.unpack(raw)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n1 * n2:
        raise DomainError(
            f"field payload in {path} has {data.size} values, expected {n1 * n2}"
        )
    if int(round(kind)) == _KIND_TORUS:
        domain = GridDomain.torus(extent, extent * n2 / n1, n1, n2)
    else:
        domain = GridDomain.box(extent, n1)
    return ScalarField(domain, data.reshape(n1, n2).copy())


def write_csv(path, field: ScalarField) -> None:
    """Write (x, y, value) rows for external plotting."""
    xg, yg = field.domain.coords()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "value"])
        for i in range(field.domain.n1):
            for j in range(field.domain.n2):
                writer.writerow([repr(float(xg[i, j])), repr(float(yg[i, j])),
                                 repr(float(field.values[i, j]))])
