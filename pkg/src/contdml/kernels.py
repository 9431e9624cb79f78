"""Second-order kernels, product kernels and their constants.

All functions are vectorized over numpy arrays.  ``u`` is the scaled
distance ``(T - t) / h``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("epanechnikov", "gaussian")

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class KernelSpec:
    family: str = "epanechnikov"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class KernelConstants:
    second_moment: float
    roughness: float
    deriv_roughness: float


def _family(kernel) -> str:
    return kernel.family if isinstance(kernel, KernelSpec) else kernel


def kernel_value(kernel, u):
    """k(u) for a :class:`KernelSpec` or a family name."""
    family = _family(kernel)
    u = np.asarray(u, dtype=float)
    if family == "epanechnikov":
        return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)
    if family == "gaussian":
        return np.exp(-0.5 * u * u) / _SQRT_2PI
    raise ValueError(f"unknown kernel family {family!r}")


def kernel_derivative(kernel, u):
    """k'(u).  The Epanechnikov derivative is 0 at |u| = 1."""
    family = _family(kernel)
    u = np.asarray(u, dtype=float)
    if family == "epanechnikov":
        return np.where(np.abs(u) < 1.0, -1.5 * u, 0.0)
    if family == "gaussian":
        return -u * np.exp(-0.5 * u * u) / _SQRT_2PI
    raise ValueError(f"unknown kernel family {family!r}")


def product_kernel(spec: KernelSpec, t_obs, t_eval):
    """K_h(T - t) = prod_j k((T_j - t_j)/h) / h, one factor of 1/h per dimension.

    ``t_obs`` is (n, d_t) or (d_t,); ``t_eval`` is (d_t,).  Returns (n,) or a scalar.
    """
    t_obs = np.asarray(t_obs, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    h = spec.bandwidth
    vals = kernel_value(spec.family, (t_obs - t_eval) / h) / h
    return np.prod(vals, axis=-1)


def product_kernel_partial_t1(spec: KernelSpec, t_obs, t_eval):
    """Derivative of :func:`product_kernel` with respect to the first coordinate of ``t_eval``."""
    t_obs = np.asarray(t_obs, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    h = spec.bandwidth
    u = (t_obs - t_eval) / h
    vals = kernel_value(spec.family, u) / h
    first = -kernel_derivative(spec.family, u[..., 0]) / (h * h)
    return first * np.prod(vals[..., 1:], axis=-1)


def kernel_constants(kernel) -> KernelConstants:
    family = _family(kernel)
    if family == "epanechnikov":
        return KernelConstants(second_moment=0.2, roughness=0.6, deriv_roughness=1.5)
    if family == "gaussian":
        # int k'^2 = int u^2 phi(u)^2 du = 1 / (4 sqrt(pi))
        return KernelConstants(
            second_moment=1.0,
            roughness=1.0 / (2.0 * np.sqrt(np.pi)),
            deriv_roughness=1.0 / (4.0 * np.sqrt(np.pi)),
        )
    raise ValueError(f"unknown kernel family {family!r}")


def convolution_kernel(kernel, rho):
    """kbar(rho) = int k(u) k(u - rho) du, closed form."""
    family = _family(kernel)
    rho = np.abs(np.asarray(rho, dtype=float))
    if family == "gaussian":
        return np.exp(-0.25 * rho * rho) / (2.0 * np.sqrt(np.pi))
    if family == "epanechnikov":
        # overlap of supports is [rho - 1, 1]; polynomial integral on 0 <= rho <= 2
        r = np.minimum(rho, 2.0)
        val = 0.5625 * (32.0 - 40.0 * r**2 + 20.0 * r**3 - r**5) / 30.0
        return np.where(rho < 2.0, val, 0.0)
    raise ValueError(f"unknown kernel family {family!r}")
