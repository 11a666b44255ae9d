"""Relative equilibria, their linear stability, and the energy-momentum diagram."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow import jacobian, make_field
from .model import ModelParams, derive, equilibrium_energy, eval_effective, kinetic_weights

#: relative tolerance on C**4 - C0**4 below which the equilibrium is degenerate
DEGENERATE_RTOL = 1e-12
#: tolerance on real parts (relative to the largest eigenvalue modulus)
SPECTRAL_TOL = 1e-8


@dataclass(frozen=True)
class EquilibriumInfo:
    R: float
    z: float
    C: float
    h: float
    kind: str
    eigenvalues: tuple
    closed_form: tuple
    hessian: np.ndarray
    f_value: float

    def to_dict(self) -> dict:
        return {
            "R": self.R, "z": self.z, "C": self.C, "h": self.h, "kind": self.kind,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "closed_form": [[z.real, z.imag] for z in self.closed_form],
            "f_value": self.f_value,
        }


def stability_function(params: ModelParams, C: float, R: float) -> float:
    """``f(R) = -2 alpha R**2 + 6 C**2 R - 12 beta``; ``M R**5 d2U/dR2 = f(R)`` at z = 0."""
    d = derive(params)
    return -2.0 * d.alpha * R * R + 6.0 * C * C * R - 12.0 * d.beta


def equilibrium_radii(params: ModelParams, C: float) -> list[float]:
    """Roots of ``alpha R**2 - 2 C**2 R + 3 beta = 0``, largest first."""
    d = derive(params)
    disc = C**4 - d.C0**4
    if abs(disc) <= DEGENERATE_RTOL * d.C0**4:
        return [C * C / d.alpha]
    if disc < 0:
        return []
    root = math.sqrt(disc)
    # the smaller root via the product of roots avoids cancellation
    R1 = (C * C + root) / d.alpha
    return [R1, 3.0 * d.beta / (d.alpha * R1)]


def linearization(params: ModelParams, C: float, R: float) -> np.ndarray:
    """Jacobian of the reduced equations of motion at ``(R, 0, 0, 0)``."""
    f = make_field("reduced", params, C, 0.0, complex_step=True)
    return jacobian(f, [R, 0.0, 0.0, 0.0])


def closed_form_eigenvalues(params: ModelParams, C: float, R: float) -> tuple:
    """Eigenvalues from the block structure of the linearization at z = 0.

    The (R, P_R) block gives ``lambda**2 = 4 (3 beta - C**2 R)/(M**2 R**5)``
    and the (z, P_z) block gives ``lambda**2 = -k_z (16 A1/R**3 + 192 B1/R**5)``.
    """
    d = derive(params)
    _, kz = kinetic_weights(params)
    hzz = 16.0 * params.A1 / R**3 + 192.0 * params.B1 / R**5
    lz = complex(0.0, math.sqrt(kz * hzz))
    lr2 = 4.0 * (3.0 * d.beta - C * C * R) / (params.M**2 * R**5)
    lr = complex(math.sqrt(lr2), 0.0) if lr2 >= 0 else complex(0.0, math.sqrt(-lr2))
    return _sorted((lz, -lz, lr, -lr))


def _sorted(vals) -> tuple:
    return tuple(sorted((complex(v) for v in vals), key=lambda z: (round(z.real, 12), z.imag)))


def classify_spectrum(eigs, tol: float = SPECTRAL_TOL) -> str:
    scale = max(abs(z) for z in eigs) or 1.0
    if any(abs(z) <= tol * scale for z in eigs):
        return "degenerate"
    if any(abs(z.real) > tol * scale for z in eigs):
        return "unstable"
    return "stable"


def relative_equilibria(params: ModelParams, C: float, convention: str = "hamiltonian") -> list[EquilibriumInfo]:
    """Collinear relative equilibria at angular momentum ``C`` (largest R first).

    The kind comes from the numerical eigenvalues of the linearization.
    """
    if not (math.isfinite(C) and C >= 0):
        raise ValueError(f"C must be finite and >= 0, got {C!r}")
    out = []
    radii = equilibrium_radii(params, C)
    for R in radii:
        eigs = _sorted(np.linalg.eigvals(linearization(params, C, R)))
        kind = "degenerate" if len(radii) == 1 else classify_spectrum(eigs)
        out.append(EquilibriumInfo(
            R=R, z=0.0, C=float(C), h=equilibrium_energy(params, C, R, convention),
            kind=kind, eigenvalues=eigs, closed_form=closed_form_eigenvalues(params, C, R),
            hessian=eval_effective(params, C, R, 0.0).hess,
            f_value=stability_function(params, C, R),
        ))
    return out


@dataclass(frozen=True)
class EMPoint:
    R: float
    C: float
    h: float
    branch: str


def em_diagram(params: ModelParams, R_range=(0.05, 50.0), n: int = 1000,
               convention: str = "hamiltonian") -> list[EMPoint]:
    """Energy-momentum curve swept over log-spaced R, sorted by C (then R)."""
    lo, hi = float(R_range[0]), float(R_range[1])
    if not (0 < lo < hi and math.isfinite(hi)):
        raise ValueError(f"R_range must satisfy 0 < lo < hi, got {R_range!r}")
    if n < 2:
        raise ValueError("n must be >= 2")
    d = derive(params)
    R0 = math.sqrt(3.0 * d.beta / d.alpha)
    pts = []
    for R in np.geomspace(lo, hi, n):
        R = float(R)
        C = math.sqrt((d.alpha * R * R + 3.0 * d.beta) / (2.0 * R))
        if abs(R - R0) <= DEGENERATE_RTOL * R0:
            branch = "degenerate"
        else:
            branch = "stable" if R > R0 else "unstable"
        pts.append(EMPoint(R, C, equilibrium_energy(params, C, R, convention), branch))
    pts.sort(key=lambda p: (p.C, p.R))
    return pts


def em_self_intersections(points, c_tol: float = 1e-9, h_tol: float = 1e-9,
                          r_tol: float = 1e-6) -> list[tuple[EMPoint, EMPoint]]:
    """Pairs of points that coincide in (C, h) while their R values differ."""
    pts = sorted(points, key=lambda p: p.C)
    bad = []
    for i, p in enumerate(pts):
        j = i + 1
        while j < len(pts) and pts[j].C - p.C < c_tol:
            q = pts[j]
            if abs(q.h - p.h) < h_tol and abs(q.R - p.R) >= r_tol:
                bad.append((p, q))
            j += 1
    return bad


def write_em_csv(points, path, fmt: str = "%.17g") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("R", "C", "h", "branch"))
        for p in points:
            w.writerow((fmt % p.R, fmt % p.C, fmt % p.h, p.branch))
