"""Weibull step-speed and wrapped Cauchy turning-angle distributions.

Provides densities, inverse-CDF sampling (so a single uniform stream can
drive every noise draw), and maximum-likelihood fitting for both families.
All sampling functions accept scalars or numpy arrays and are deterministic
functions of their uniform argument.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import FitError
from .geometry import TWO_PI, wrap_angle

# Profile-likelihood shape bracket for the Weibull fit; data demanding a
# shape outside this range are treated as a failed fit.
_SHAPE_LO = 0.1
_SHAPE_HI = 20.0
_WC_MAX_CONCENTRATION = 1.0 - 1e-6


@dataclass(frozen=True, slots=True)
class WeibullParams:
    """Weibull(shape, scale) for nonnegative step speeds (meters per step)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"Weibull parameters must be positive, got {self}")

    def mean(self) -> float:
        return self.scale * gamma_fn(1.0 + 1.0 / self.shape)

    def rms(self) -> float:
        return self.scale * math.sqrt(gamma_fn(1.0 + 2.0 / self.shape))


@dataclass(frozen=True, slots=True)
class WrappedCauchyParams:
    """Wrapped Cauchy(concentration, location) for turning angles."""

    concentration: float
    location: float

    def __post_init__(self):
        if not (0.0 <= self.concentration < 1.0):
            raise ValueError(
                f"concentration must lie in [0, 1), got {self.concentration}"
            )
        object.__setattr__(self, "location", wrap_angle(self.location))


def weibull_pdf(params: WeibullParams, v):
    """Density (a/s) (v/s)^(a-1) exp(-(v/s)^a); v must be nonnegative."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("speed must be nonnegative")
    a, s = params.shape, params.scale
    with np.errstate(divide="ignore"):
        # v = 0 is a boundary case: density is 1/s for a = 1, 0 for a > 1,
        # and diverges for a < 1.
        z = v / s
        out = (a / s) * np.power(z, a - 1.0) * np.exp(-np.power(z, a))
    if out.ndim == 0:
        return float(out)
    return out


def weibull_sample(params: WeibullParams, u):
    """Inverse-CDF draw s * (-ln(1-u))^(1/a) for u in the open unit interval."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or np.any(u >= 1):
        raise ValueError("uniform draw must lie strictly inside (0, 1)")
    out = params.scale * np.power(-np.log1p(-u), 1.0 / params.shape)
    if out.ndim == 0:
        return float(out)
    return out


def wc_pdf(params: WrappedCauchyParams, phi):
    """Density (1/2pi) (1-a^2) / (1 + a^2 - 2a cos(phi - m)); wraps phi."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("angle must be finite")
    a, m = params.concentration, params.location
    out = (1.0 - a * a) / (TWO_PI * (1.0 + a * a - 2.0 * a * np.cos(phi - m)))
    if out.ndim == 0:
        return float(out)
    return out


def wc_sample(params: WrappedCauchyParams, u):
    """Inverse-CDF draw, wrapped to [0, 2*pi), for u in the open unit interval."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or np.any(u >= 1):
        raise ValueError("uniform draw must lie strictly inside (0, 1)")
    a, m = params.concentration, params.location
    out = wrap_angle(m + 2.0 * np.arctan(((1.0 - a) / (1.0 + a)) * np.tan(np.pi * (u - 0.5))))
    if np.ndim(out) == 0:
        return float(out)
    return out


def weibull_log_likelihood(params: WeibullParams, samples) -> float:
    samples = np.asarray(samples, dtype=float)
    return float(np.sum(np.log(weibull_pdf(params, samples))))


def wc_log_likelihood(params: WrappedCauchyParams, samples) -> float:
    samples = np.asarray(samples, dtype=float)
    return float(np.sum(np.log(wc_pdf(params, samples))))


def weibull_mle(samples, tol: float = 1e-10, max_iters: int = 200) -> WeibullParams:
    """Fit (shape, scale) by maximum likelihood.

    The shape solves the standard profile-likelihood fixed point

        sum(v^a ln v) / sum(v^a) - 1/a - mean(ln v) = 0

    by safeguarded Newton with a bisection fallback on [0.1, 20]; the scale
    then follows in closed form.  Requires at least 10 positive samples that
    are not all equal.
    """
    v = np.asarray(samples, dtype=float)
    if v.size < 10:
        raise ValueError(f"need at least 10 samples, got {v.size}")
    if np.any(v < 0):
        raise ValueError("samples must be nonnegative")
    if np.any(v == 0):
        raise FitError("zero-valued samples make the Weibull likelihood degenerate")
    if np.all(v == v[0]):
        raise FitError("all samples equal; shape is unidentifiable")

    # Normalize for conditioning; the profile equation is scale-invariant.
    vmax = float(np.max(v))
    x = v / vmax
    lx = np.log(x)
    mean_lx = float(np.mean(lx))

    def profile(a: float):
        xa = np.power(x, a)
        sa = float(np.sum(xa))
        sla = float(np.sum(xa * lx))
        slla = float(np.sum(xa * lx * lx))
        val = sla / sa - 1.0 / a - mean_lx
        deriv = (slla * sa - sla * sla) / (sa * sa) + 1.0 / (a * a)
        return val, deriv

    lo, hi = _SHAPE_LO, _SHAPE_HI
    if profile(lo)[0] >= 0 or profile(hi)[0] <= 0:
        raise FitError(f"profile equation has no root in [{_SHAPE_LO}, {_SHAPE_HI}]")
    a = 1.0
    for _ in range(max_iters):
        val, deriv = profile(a)
        if val > 0:
            hi = min(hi, a)
        else:
            lo = max(lo, a)
        a_new = a - val / deriv
        if not (lo < a_new < hi):
            a_new = 0.5 * (lo + hi)
        if abs(a_new - a) < tol:
            a = a_new
            break
        a = a_new
    else:
        raise FitError("Weibull shape iteration did not converge")

    s = float(np.mean(np.power(x, a)) ** (1.0 / a)) * vmax
    return WeibullParams(shape=float(a), scale=s)


def wc_mle(samples, tol: float = 1e-10, max_iters: int = 10000) -> WrappedCauchyParams:
    """Fit (concentration, location) by maximum likelihood.

    Runs the classical weight iteration derived from the likelihood
    stationarity condition, written in complex form with zeta = a e^{im}:

        w_i = 1 / |u_i - zeta|^2,  zeta <- sum(w u) / (sum(w) + n / (1 - |zeta|^2))

    Initialized at the circular mean direction with the mean resultant
    length as concentration.  A concentration pushing against 1 (perfectly
    aligned samples) is clamped just inside the open interval with a warning.
    """
    phis = np.asarray(samples, dtype=float)
    if phis.size < 10:
        raise ValueError(f"need at least 10 samples, got {phis.size}")
    if not np.all(np.isfinite(phis)):
        raise ValueError("samples must be finite")

    u = np.exp(1j * phis)
    n = phis.size
    zeta = complex(np.mean(u))
    clamped = False
    if abs(zeta) > _WC_MAX_CONCENTRATION:
        zeta *= _WC_MAX_CONCENTRATION / abs(zeta)
        clamped = True
    for _ in range(max_iters):
        w = 1.0 / np.abs(u - zeta) ** 2
        total = complex(np.sum(w * u))
        weight = float(np.sum(w))
        zeta_new = total / (weight + n / (1.0 - abs(zeta) ** 2))
        if abs(zeta_new) > _WC_MAX_CONCENTRATION:
            zeta_new *= _WC_MAX_CONCENTRATION / abs(zeta_new)
            clamped = True
        if abs(zeta_new - zeta) < tol:
            zeta = zeta_new
            break
        zeta = zeta_new
    else:
        raise FitError("wrapped Cauchy weight iteration did not converge")

    if clamped:
        warnings.warn(
            "wrapped Cauchy concentration clamped to the open-interval boundary",
            stacklevel=2,
        )
    return WrappedCauchyParams(
        concentration=abs(zeta), location=wrap_angle(math.atan2(zeta.imag, zeta.real))
    )
