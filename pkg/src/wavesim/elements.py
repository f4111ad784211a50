"""Element matrices: BSWI rod/beam, two-node rod/Timoshenko beam, crack spring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .basis import DEFAULT_ELEMENT_BASIS, BSWIElementBasis


class ElementError(ValueError):
    pass


class NoCrack(Exception):
    """Zero flexibility: the interface nodes should be merged instead of sprung."""


@dataclass(frozen=True)
class MaterialProps:
    E: float
    nu: float
    rho: float

    def __post_init__(self):
        if not (self.E > 0 and self.rho > 0 and -1.0 < self.nu < 0.5):
            raise ElementError(f"invalid material {self}")

    @property
    def G(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def bar_velocity(self) -> float:
        return math.sqrt(self.E / self.rho)


STEEL = MaterialProps(E=200e9, nu=0.3, rho=7800.0)
ALUMINUM = MaterialProps(E=70e9, nu=0.3, rho=2730.0)
MATERIALS = {"steel": STEEL, "aluminum": ALUMINUM}


@dataclass(frozen=True)
class SectionProps:
    """Rectangular section; ``k`` is the shear coefficient in the ``GA/k`` convention."""

    b: float
    h: float
    k: float = 1.2

    def __post_init__(self):
        if not (self.b > 0 and self.h > 0 and self.k > 0):
            raise ElementError(f"invalid section {self}")

    @property
    def A(self) -> float:
        return self.b * self.h

    @property
    def I(self) -> float:  # noqa: E743
        return self.b * self.h**3 / 12.0


@dataclass(frozen=True)
class ElementMatrices:
    K: np.ndarray
    M: np.ndarray
    dof_order: str


def _check_length(l_e):
    if not (l_e > 0 and math.isfinite(l_e)):
        raise ElementError(f"element length must be positive, got {l_e}")


def bswi_rod_matrices(
    mat: MaterialProps,
    sec: SectionProps,
    l_e: float,
    ebasis: BSWIElementBasis = DEFAULT_ELEMENT_BASIS,
) -> ElementMatrices:
    _check_length(l_e)
    K = mat.E * sec.A / l_e * ebasis.nodal(ebasis.stiff)
    M = mat.rho * sec.A * l_e * ebasis.nodal(ebasis.mass)
    return ElementMatrices(_sym(K), _sym(M), "u")


def bswi_beam_matrices(
    mat: MaterialProps,
    sec: SectionProps,
    l_e: float,
    ebasis: BSWIElementBasis = DEFAULT_ELEMENT_BASIS,
) -> ElementMatrices:
    """Timoshenko BSWI element, DOFs ordered ``[w_1..w_n, theta_1..theta_n]``.

    The bending block uses ``EI/l_e`` without the shear coefficient; it follows
    from the strain energy ``EI/2 (theta')^2 + GA/(2k) (w' - theta)^2``.
    """
    _check_length(l_e)
    GAk = mat.G * sec.A / sec.k
    EI = mat.E * sec.I
    S = ebasis.nodal(ebasis.stiff)
    C = ebasis.nodal(ebasis.mixed)
    Mm = ebasis.nodal(ebasis.mass)
    K1 = GAk / l_e * S
    K2 = -GAk * C
    K4 = EI / l_e * S + GAk * l_e * Mm
    K = np.block([[K1, K2], [K2.T, K4]])
    n = Mm.shape[0]
    Z = np.zeros((n, n))
    M = np.block([[mat.rho * sec.A * l_e * Mm, Z], [Z, mat.rho * sec.I * l_e * Mm]])
    return ElementMatrices(_sym(K), _sym(M), "w-then-theta")


def blocked_to_interleaved(n_nodes: int) -> np.ndarray:
    """Permutation ``p`` so that ``A[p][:, p]`` turns ``[w.., theta..]`` into ``[w1, th1, w2, th2, ..]``."""
    return np.column_stack([np.arange(n_nodes), n_nodes + np.arange(n_nodes)]).ravel()


def conventional_rod_matrices(mat: MaterialProps, sec: SectionProps, l_e: float) -> ElementMatrices:
    _check_length(l_e)
    K = mat.E * sec.A / l_e * np.array([[1.0, -1.0], [-1.0, 1.0]])
    M = mat.rho * sec.A * l_e / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    return ElementMatrices(K, M, "u")


def conventional_beam_matrices(mat: MaterialProps, sec: SectionProps, l_e: float) -> ElementMatrices:
    """Linear Timoshenko element with one-point (reduced) shear integration.

    DOFs ``[w_1, theta_1, w_2, theta_2]``.
    """
    _check_length(l_e)
    EI = mat.E * sec.I
    GAk = mat.G * sec.A / sec.k
    # bending strain theta' is constant on the element, so 2-point Gauss is exact
    _, wg = np.polynomial.legendre.leggauss(2)
    K = np.zeros((4, 4))
    for w in wg:
        Bb = np.array([0.0, -1.0 / l_e, 0.0, 1.0 / l_e])
        K += EI * np.outer(Bb, Bb) * (0.5 * w * l_e)
    Bs = np.array([-1.0 / l_e, -0.5, 1.0 / l_e, -0.5])
    K += GAk * l_e * np.outer(Bs, Bs)
    lin = np.array([[2.0, 1.0], [1.0, 2.0]]) * l_e / 6.0
    M = np.zeros((4, 4))
    M[np.ix_([0, 2], [0, 2])] = mat.rho * sec.A * lin
    M[np.ix_([1, 3], [1, 3])] = mat.rho * sec.I * lin
    return ElementMatrices(K, M, "interleaved")


def crack_correction(alpha, h: float):
    """Stress-intensity correction ``f_1`` at depth coordinate ``alpha``."""
    x = np.pi * np.asarray(alpha, dtype=float) / (2.0 * h)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(x > 0, np.tan(x) / np.where(x > 0, x, 1.0), 1.0)
    poly = 0.752 + 2.02 * np.asarray(alpha) / h + 0.37 * (1.0 - np.sin(x)) ** 3
    return np.sqrt(ratio) * poly / np.cos(x)


def crack_flexibilities(
    mat: MaterialProps,
    sec: SectionProps,
    a: float,
    shear_correction: Callable[[float, float], float] | None = None,
) -> tuple[float, float]:
    """Rotational (rad/(N m)) and shear (m/N) flexibilities of an open edge crack.

    Both integrals use ``f_1`` unless ``shear_correction(alpha, h)`` is given
    for the shear term.
    """
    h = sec.h
    if not (0.0 <= a < h):
        raise ElementError(f"crack depth must satisfy 0 <= a < h, got a={a}, h={h}")
    if a == 0.0:
        return 0.0, 0.0

    def integral(f):
        val, _ = integrate.quad(
            lambda al: al / h**2 * f(al, h) ** 2, 0.0, a, epsrel=1e-10, epsabs=0.0, limit=200
        )
        return val

    J_b = integral(crack_correction)
    J_s = J_b if shear_correction is None else integral(shear_correction)
    c_b = 72.0 * math.pi / (mat.E * sec.b * h**2) * J_b
    c_s = 2.0 * sec.k**2 * math.pi / (mat.E * sec.b) * J_s
    return c_b, c_s


def crack_spring_matrices(c_b: float, c_s: float) -> ElementMatrices:
    """Massless spring joining ``[w_L, theta_L]`` to ``[w_R, theta_R]``."""
    if c_b == 0.0 or c_s == 0.0:
        raise NoCrack("zero flexibility: merge interface nodes instead of inserting a spring")
    if c_b < 0 or c_s < 0:
        raise ElementError(f"negative crack flexibility ({c_b}, {c_s})")
    k_b = 1.0 / c_b
    k_s = 1.0 / c_s
    K = np.array(
        [
            [k_s, 0.0, -k_s, 0.0],
            [0.0, k_b, 0.0, -k_b],
            [-k_s, 0.0, k_s, 0.0],
            [0.0, -k_b, 0.0, k_b],
        ]
    )
    return ElementMatrices(K, np.zeros((4, 4)), "interleaved")


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)
