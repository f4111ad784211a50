"""Cubic B-spline scaling functions on the interval and BSWI element shape functions.

The element space is spanned by the 11 order-4 B-splines on the clamped
knot vector ``[0]*4 + [1/8, ..., 7/8] + [1]*4``.  Nodal shape functions are
obtained by inverting the matrix of basis values at the element nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class BasisDomainError(ValueError):
    """Raised when a local coordinate lies outside [0, 1]."""


class NodeLayoutError(ValueError):
    """Raised when a node layout gives a singular or ill-conditioned evaluation matrix."""


@dataclass(frozen=True)
class ScalingBasis:
    """Order-``m`` B-spline scaling functions at scale ``j`` on [0, 1]."""

    order: int = 4
    scale: int = 3

    def __post_init__(self):
        if 2**self.scale < 2 * self.order - 1:
            raise ValueError(
                f"scale {self.scale} too coarse for order {self.order}: "
                f"need 2**j >= 2m - 1"
            )

    @property
    def degree(self) -> int:
        return self.order - 1

    @property
    def n_funcs(self) -> int:
        return 2**self.scale + self.order - 1

    @cached_property
    def knot_vector(self) -> np.ndarray:
        inner = np.arange(1, 2**self.scale) / 2**self.scale
        m = self.order
        return np.concatenate([np.zeros(m), inner, np.ones(m)])

    @cached_property
    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, 2**self.scale + 1)

    def span_index(self, xi: np.ndarray) -> np.ndarray:
        """Knot-span index ``mu`` with ``t[mu] <= xi < t[mu+1]`` (last span closed)."""
        t = self.knot_vector
        p = self.degree
        mu = np.searchsorted(t, xi, side="right") - 1
        return np.clip(mu, p, len(t) - p - 2)


def _check_domain(xi) -> np.ndarray:
    arr = np.asarray(xi, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise BasisDomainError(f"local coordinate outside [0, 1]: {xi!r}")
    return arr


def _cox_de_boor(basis: ScalingBasis, xi: np.ndarray, degree: int) -> np.ndarray:
    """All B-splines of ``degree`` on the basis knots, shape ``(len(xi), n_knots-degree-1)``."""
    t = basis.knot_vector
    n_knots = len(t)
    mu = basis.span_index(xi)
    # degree-0 indicator of the active span; clamping puts xi = 1 in the last span
    N = np.zeros((xi.size, n_knots - 1))
    N[np.arange(xi.size), mu] = 1.0
    for q in range(1, degree + 1):
        nq = n_knots - q - 1
        out = np.zeros((xi.size, nq))
        for i in range(nq):
            d1 = t[i + q] - t[i]
            d2 = t[i + q + 1] - t[i + 1]
            acc = np.zeros(xi.size)
            if d1 > 0.0:
                acc += (xi - t[i]) / d1 * N[:, i]
            if d2 > 0.0:
                acc += (t[i + q + 1] - xi) / d2 * N[:, i + 1]
            out[:, i] = acc
        N = out
    return N


def eval_scaling_functions(basis: ScalingBasis, xi) -> np.ndarray:
    """Values of the scaling functions at ``xi``.

    Returns a vector of length ``n_funcs`` for scalar input, otherwise an
    array of shape ``(len(xi), n_funcs)``.
    """
    arr = _check_domain(xi)
    vals = _cox_de_boor(basis, np.atleast_1d(arr).ravel(), basis.degree)
    return vals[0] if arr.ndim == 0 else vals


def eval_scaling_derivatives(basis: ScalingBasis, xi) -> np.ndarray:
    """First derivatives d(phi)/d(xi).

    At interior knots the right-hand derivative is returned, at ``xi = 1`` the
    left-hand one.
    """
    arr = _check_domain(xi)
    x = np.atleast_1d(arr).ravel()
    t = basis.knot_vector
    p = basis.degree
    lower = _cox_de_boor(basis, x, p - 1)
    d = np.zeros((x.size, basis.n_funcs))
    for i in range(basis.n_funcs):
        d1 = t[i + p] - t[i]
        d2 = t[i + p + 1] - t[i + 1]
        if d1 > 0.0:
            d[:, i] += p / d1 * lower[:, i]
        if d2 > 0.0:
            d[:, i] -= p / d2 * lower[:, i + 1]
    return d[0] if arr.ndim == 0 else d


@dataclass(frozen=True)
class NodeLayout:
    """Local node coordinates of one element, strictly increasing from 0 to 1."""

    coords: tuple

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise NodeLayoutError("node layout needs at least two coordinates")
        if c[0] != 0.0 or c[-1] != 1.0 or np.any(np.diff(c) <= 0.0):
            raise NodeLayoutError(
                f"node coordinates must increase strictly from 0 to 1: {self.coords}"
            )

    @classmethod
    def default(cls) -> NodeLayout:
        inner = [k / 8 for k in range(1, 8)]
        return cls(tuple([0.0, 1 / 16] + inner + [15 / 16, 1.0]))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def __len__(self):
        return len(self.coords)


@dataclass(frozen=True)
class TransformMatrix:
    """``R`` maps nodal values to spline coefficients: ``a = R u``."""

    R: np.ndarray
    evaluation: np.ndarray
    condition_number: float


MAX_CONDITION = 1e12


def build_transform_matrix(basis: ScalingBasis, nodes: NodeLayout) -> TransformMatrix:
    if len(nodes) != basis.n_funcs:
        raise NodeLayoutError(
            f"node layout {nodes.coords} has {len(nodes)} nodes, basis needs {basis.n_funcs}"
        )
    # row j holds Phi(xi_j), so u = A a and R = A^-1
    A = eval_scaling_functions(basis, nodes.array)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NodeLayoutError(
            f"evaluation matrix for node layout {nodes.coords} is singular or "
            f"ill-conditioned (cond = {cond:.3e})"
        )
    R = np.linalg.inv(A)
    residual = np.max(np.abs(A @ R - np.eye(basis.n_funcs)))
    if residual >= 1e-9:
        raise NodeLayoutError(
            f"inversion residual {residual:.2e} too large for node layout {nodes.coords}"
        )
    return TransformMatrix(R=R, evaluation=A, condition_number=float(cond))


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre points and weights applied on every knot span of [0, 1]."""

    points: np.ndarray
    weights: np.ndarray
    spans: np.ndarray
    points_per_span: int

    @classmethod
    def per_span(cls, breakpoints: np.ndarray, n_points: int = 4) -> QuadratureRule:
        x, w = np.polynomial.legendre.leggauss(n_points)
        a = breakpoints[:-1, None]
        b = breakpoints[1:, None]
        pts = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
        wts = 0.5 * (b - a) * w[None, :]
        spans = np.repeat(np.arange(len(breakpoints) - 1), n_points)
        return cls(points=pts.ravel(), weights=wts.ravel(), spans=spans, points_per_span=n_points)

    def integrate(self, values: np.ndarray) -> float | np.ndarray:
        """Sum ``w_q * values[q, ...]`` over all quadrature points."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@dataclass(frozen=True)
class BSWIElementBasis:
    """Bundle of basis, node layout, transform and quadrature used by the elements.

    The three reference integrals over [0, 1] are cached:
    ``mass = int Phi^T Phi``, ``stiff = int Phi'^T Phi'``, ``mixed = int Phi'^T Phi``.
    """

    basis: ScalingBasis = field(default_factory=ScalingBasis)
    nodes: NodeLayout = field(default_factory=NodeLayout.default)
    quad_points: int = 4

    @cached_property
    def transform(self) -> TransformMatrix:
        return build_transform_matrix(self.basis, self.nodes)

    @property
    def R(self) -> np.ndarray:
        return self.transform.R

    @cached_property
    def quadrature(self) -> QuadratureRule:
        return QuadratureRule.per_span(self.basis.breakpoints, self.quad_points)

    @cached_property
    def _tabulated(self):
        q = self.quadrature
        return (
            eval_scaling_functions(self.basis, q.points),
            eval_scaling_derivatives(self.basis, q.points),
        )

    @cached_property
    def mass(self) -> np.ndarray:
        phi, _ = self._tabulated
        return self.quadrature.integrate(phi[:, :, None] * phi[:, None, :])

    @cached_property
    def stiff(self) -> np.ndarray:
        _, dphi = self._tabulated
        return self.quadrature.integrate(dphi[:, :, None] * dphi[:, None, :])

    @cached_property
    def mixed(self) -> np.ndarray:
        phi, dphi = self._tabulated
        return self.quadrature.integrate(dphi[:, :, None] * phi[:, None, :])

    def nodal(self, G: np.ndarray) -> np.ndarray:
        """Map a coefficient-space matrix to nodal DOFs: ``R^T G R``."""
        return self.R.T @ G @ self.R

    def shape_functions(self, xi) -> np.ndarray:
        return eval_shape_functions(self.basis, self.nodes, xi, transform=self.transform)


def eval_shape_functions(
    basis: ScalingBasis,
    nodes: NodeLayout,
    xi,
    derivative: bool = False,
    transform: TransformMatrix | None = None,
) -> np.ndarray:
    """Nodal shape functions ``N(xi) = Phi(xi) R`` (or their xi-derivative)."""
    if transform is None:
        transform = build_transform_matrix(basis, nodes)
    if derivative:
        vals = eval_scaling_derivatives(basis, xi)
    else:
        vals = eval_scaling_functions(basis, xi)
    return vals @ transform.R


DEFAULT_ELEMENT_BASIS = BSWIElementBasis()
