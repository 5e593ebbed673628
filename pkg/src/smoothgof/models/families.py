"""Concrete distribution families used by the experiments."""

from __future__ import annotations

import numpy as np
from scipy import special
from scipy.interpolate import CubicHermiteSpline

from ..exceptions import DegenerateLineError, EstimationError, ParameterError
from ..numerics import _gl_reference
from .base import ParametricModel

_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)
SQRT2 = np.sqrt(2.0)


def _npdf(z):
    return np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)


class Uniform(ParametricModel):
    family = "uniform"
    param_names = ()

    def __init__(self, lo, hi):
        super().__init__({}, (lo, hi))

    def _pdf(self, x):
        lo, hi = self.support
        return np.full_like(x, 1.0 / (hi - lo))

    def _cdf(self, x):
        lo, hi = self.support
        return (x - lo) / (hi - lo)

    def _quantile(self, u):
        lo, hi = self.support
        return lo + u * (hi - lo)

    def _score_all(self, x):
        return {}


class TruncatedNormal(ParametricModel):
    """Normal(mu, sigma) restricted to ``[lo, hi]``; parameters are those of
    the parent normal."""

    family = "truncnorm"
    param_names = ("mu", "sigma")

    def __init__(self, mu, sigma, lo, hi, free=()):
        super().__init__({"mu": mu, "sigma": sigma}, (lo, hi), free)

    def _validate(self):
        mu, sigma = self._values["mu"], self._values["sigma"]
        if not (np.isfinite(mu) and np.isfinite(sigma)) or sigma <= 0:
            raise ParameterError(f"truncnorm needs finite mu and sigma > 0, got {mu}, {sigma}")
        lo, hi = self.support
        a, b = (lo - mu) / sigma, (hi - mu) / sigma
        # work on the side of the mode with the better-conditioned tail
        self._flip = a > 0
        if self._flip:
            self._Pa, self._Pb = special.ndtr(-a), special.ndtr(-b)
            self._Z = self._Pa - self._Pb
        else:
            self._Pa, self._Pb = special.ndtr(a), special.ndtr(b)
            self._Z = self._Pb - self._Pa
        if not self._Z > 1e-300:
            raise ParameterError("truncnorm has no mass on its support")
        self._a, self._b = a, b

    def _z(self, x):
        return (x - self._values["mu"]) / self._values["sigma"]

    def _pdf(self, x):
        return _npdf(self._z(x)) / (self._values["sigma"] * self._Z)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = self._z(x)
        out = -0.5 * z * z - np.log(self._values["sigma"] * self._Z) - _LOG_SQRT_2PI
        return np.where(self.in_support(x), out, -np.inf)

    def _cdf(self, x):
        z = self._z(x)
        if self._flip:
            return (self._Pa - special.ndtr(-z)) / self._Z
        return (special.ndtr(z) - self._Pa) / self._Z

    def _quantile(self, u):
        mu, sigma = self._values["mu"], self._values["sigma"]
        if self._flip:
            z = -special.ndtri(self._Pa - u * self._Z)
        else:
            z = special.ndtri(self._Pa + u * self._Z)
        lo, hi = self.support
        return np.clip(mu + sigma * z, lo, hi)

    def _score_all(self, x):
        sigma = self._values["sigma"]
        z = self._z(x)
        a, b = self._a, self._b
        pa, pb = _npdf(a), _npdf(b)
        # finite-support terms vanish for infinite truncation points
        apa = a * pa if np.isfinite(a) else 0.0
        bpb = b * pb if np.isfinite(b) else 0.0
        d_mu = z / sigma - (pa - pb) / (sigma * self._Z)
        d_sigma = (z * z - 1.0) / sigma - (apa - bpb) / (sigma * self._Z)
        return {"mu": d_mu, "sigma": d_sigma}

    def param_bounds(self):
        lo, hi = self.support
        width = hi - lo
        bounds = {"mu": (lo, hi), "sigma": (1e-3 * width, 10.0 * width)}
        return [bounds[k] for k in self.free]

    def initial_params(self, data, weights=None):
        w = np.ones_like(data) if weights is None else weights
        mean = np.average(data, weights=w)
        sd = np.sqrt(max(np.average((data - mean) ** 2, weights=w), 1e-12))
        guess = {"mu": mean, "sigma": sd}
        out = []
        for k, (blo, bhi) in zip(self.free, self.param_bounds()):
            out.append(np.clip(guess[k], blo, bhi))
        return np.array(out, dtype=float)


def _laplace_cdf(t):
    return np.where(t < 0, 0.5 * np.exp(np.minimum(t, 0)), 1.0 - 0.5 * np.exp(-np.maximum(t, 0)))


class TruncatedLaplace(ParametricModel):
    """Laplace(mu, scale) restricted to ``[lo, hi]``; density
    ``exp(-|x - mu| / scale) / (2 scale Z)``."""

    family = "trunclaplace"
    param_names = ("mu", "scale")

    def __init__(self, mu, scale, lo, hi, free=()):
        super().__init__({"mu": mu, "scale": scale}, (lo, hi), free)

    def _validate(self):
        mu, s = self._values["mu"], self._values["scale"]
        if not (np.isfinite(mu) and np.isfinite(s)) or s <= 0:
            raise ParameterError("trunclaplace needs finite mu and scale > 0")
        lo, hi = self.support
        self._a, self._b = (lo - mu) / s, (hi - mu) / s
        self._La, self._Lb = _laplace_cdf(self._a), _laplace_cdf(self._b)
        self._Z = self._Lb - self._La
        if not self._Z > 1e-300:
            raise ParameterError("trunclaplace has no mass on its support")

    @property
    def breakpoints(self):
        return (self._values["mu"],)

    def _pdf(self, x):
        mu, s = self._values["mu"], self._values["scale"]
        return np.exp(-np.abs(x - mu) / s) / (2 * s * self._Z)

    def _cdf(self, x):
        mu, s = self._values["mu"], self._values["scale"]
        return (_laplace_cdf((x - mu) / s) - self._La) / self._Z

    def _quantile(self, u):
        mu, s = self._values["mu"], self._values["scale"]
        p = self._La + u * self._Z
        with np.errstate(divide="ignore"):
            t = np.where(p < 0.5, np.log(2 * p), -np.log(2 * (1 - p)))
        lo, hi = self.support
        return np.clip(mu + s * t, lo, hi)

    def _score_all(self, x):
        mu, s = self._values["mu"], self._values["scale"]
        t = (x - mu) / s
        a, b = self._a, self._b
        la, lb = 0.5 * np.exp(-abs(a)), 0.5 * np.exp(-abs(b))
        d_mu = np.sign(t) / s - (la - lb) / (s * self._Z)
        d_scale = (np.abs(t) - 1.0) / s - (a * la - b * lb) / (s * self._Z)
        return {"mu": d_mu, "scale": d_scale}

    def param_bounds(self):
        lo, hi = self.support
        width = hi - lo
        bounds = {"mu": (lo, hi), "scale": (1e-3 * width, 10.0 * width)}
        return [bounds[k] for k in self.free]


class AsymmetricLaplace(ParametricModel):
    """Asymmetric Laplace with location ``theta``, scale ``sigma`` and
    asymmetry ``beta`` (Kotz-Kozubowski-Podgorski parametrization)."""

    family = "asymlaplace"
    param_names = ("theta", "sigma", "beta")

    def __init__(self, theta, sigma, beta, free=("beta",)):
        super().__init__({"theta": theta, "sigma": sigma, "beta": beta},
                         (-np.inf, np.inf), free)

    def _validate(self):
        v = self._values
        if not all(np.isfinite(list(v.values()))):
            raise ParameterError("asymlaplace parameters must be finite")
        if v["sigma"] <= 0 or v["beta"] <= 0:
            raise ParameterError(f"asymlaplace needs sigma > 0 and beta > 0, got {v}")

    @property
    def breakpoints(self):
        return (self._values["theta"],)

    @property
    def lower_mass(self):
        b = self._values["beta"]
        return b * b / (1 + b * b)

    def in_support(self, x):
        return np.isfinite(x)

    def logpdf(self, x):
        v = self._values
        theta, sigma, beta = v["theta"], v["sigma"], v["beta"]
        d = np.asarray(x, dtype=float) - theta
        const = np.log(SQRT2 / sigma * beta / (1 + beta * beta))
        return const + np.where(d >= 0, -SQRT2 * beta / sigma * d, SQRT2 / (sigma * beta) * d)

    def _pdf(self, x):
        return np.exp(self.logpdf(x))

    def _cdf(self, x):
        v = self._values
        theta, sigma, beta = v["theta"], v["sigma"], v["beta"]
        d = x - theta
        lower = self.lower_mass * np.exp(SQRT2 / (sigma * beta) * np.minimum(d, 0))
        upper = 1.0 - np.exp(-SQRT2 * beta / sigma * np.maximum(d, 0)) / (1 + beta * beta)
        return np.where(d < 0, lower, upper)

    def _quantile(self, u):
        v = self._values
        theta, sigma, beta = v["theta"], v["sigma"], v["beta"]
        kappa = self.lower_mass
        with np.errstate(divide="ignore"):
            left = theta + sigma * beta / SQRT2 * np.log(u / kappa)
            right = theta - sigma / (SQRT2 * beta) * np.log((1 - u) * (1 + beta * beta))
        return np.where(u <= kappa, left, right)

    def _score_all(self, x):
        v = self._values
        theta, sigma, beta = v["theta"], v["sigma"], v["beta"]
        d = x - theta
        pos = d >= 0
        common = 1.0 / beta - 2.0 * beta / (1 + beta * beta)
        d_beta = common + np.where(pos, -SQRT2 / sigma * d, -SQRT2 / (sigma * beta * beta) * d)
        d_sigma = -1.0 / sigma + np.where(pos, SQRT2 * beta / sigma ** 2 * d,
                                          -SQRT2 / (sigma ** 2 * beta) * d)
        d_theta = np.where(pos, SQRT2 * beta / sigma, -SQRT2 / (sigma * beta))
        return {"beta": d_beta, "sigma": d_sigma, "theta": d_theta}

    def param_bounds(self):
        bounds = {"beta": (1e-6, 1e6), "sigma": (1e-8, np.inf), "theta": (-np.inf, np.inf)}
        return [bounds[k] for k in self.free]

    def fit(self, data):
        data = self.check_data(data)
        if self.free == ("beta",):
            beta = fit_asym_laplace(data, self._values["theta"], self._values["sigma"])
            return self.with_params([beta])
        return super().fit(data)


def asym_laplace_model(theta, sigma, beta):
    return AsymmetricLaplace(theta, sigma, beta)


def asym_laplace_equation(beta, data, theta, sigma):
    """Left side of the asymmetry likelihood equation (zero at the MLE)."""
    d = np.asarray(data, dtype=float) - theta
    n = d.size
    below = np.sum(np.maximum(-d, 0.0))
    above = np.sum(np.maximum(d, 0.0))
    return _asym_eq(beta, below, above, n, sigma)


def _asym_eq(beta, below, above, n, sigma):
    return (1.0 - 2.0 * beta * beta / (1.0 + beta * beta)
            + SQRT2 / sigma * (below / (n * beta) - beta * above / n))


def fit_asym_laplace(data, theta, sigma, bracket=(1e-6, 1e6)):
    """MLE of the asymmetry parameter with ``theta`` and ``sigma`` known.

    Bracketed Brent root search in ``log beta`` followed by Newton polishing.
    """
    from scipy.optimize import brentq

    d = np.asarray(data, dtype=float) - theta
    if d.size < 1 or not np.all(np.isfinite(d)):
        raise EstimationError("need at least one finite observation")
    n = d.size
    below = float(np.sum(np.maximum(-d, 0.0)))
    above = float(np.sum(np.maximum(d, 0.0)))

    def f(t):
        return _asym_eq(np.exp(t), below, above, n, sigma)

    tlo, thi = np.log(bracket[0]), np.log(bracket[1])
    flo, fhi = f(tlo), f(thi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise EstimationError(
            f"no sign change of the likelihood equation on beta in {bracket}"
        )
    beta = float(np.exp(brentq(f, tlo, thi, xtol=1e-14, rtol=4 * np.finfo(float).eps)))
    c = SQRT2 / sigma
    for _ in range(3):
        r = _asym_eq(beta, below, above, n, sigma)
        dr = -4 * beta / (1 + beta * beta) ** 2 + c * (-below / (n * beta * beta) - above / n)
        if dr == 0 or abs(r) < 1e-15:
            break
        step = beta - r / dr
        if not bracket[0] < step < bracket[1]:
            break
        if abs(_asym_eq(step, below, above, n, sigma)) >= abs(r):
            break
        beta = step
    return beta


# -- spectral line profile ------------------------------------------------------

def _moffat(d, scale, power):
    return (1.0 + (d / scale) ** 2) ** (-power)


def _moffat_deriv(d, scale, power):
    return -2.0 * power * d / scale ** 2 * (1.0 + (d / scale) ** 2) ** (-power - 1)


class ConvolvedLine(ParametricModel):
    """Normal(mu, sigma) convolved with a Moffat kernel, normalized on the
    support. All parameters fixed.

    The convolution integral over ``w0`` uses a 201-node Gauss-Legendre rule
    on ``mu +- 8 sigma``. Values and slopes are computed that way on a dense
    grid and evaluated through the cubic Hermite interpolant, whose exact
    antiderivative gives a CDF consistent with the density.
    """

    family = "line"
    param_names = ("mu", "sigma", "scale", "power")
    GRID = 8193
    W_NODES = 201

    def __init__(self, mu, sigma, lo, hi, scale=0.05, power=2.5):
        super().__init__({"mu": mu, "sigma": sigma, "scale": scale, "power": power},
                         (lo, hi))

    def _validate(self):
        v = self._values
        if v["sigma"] <= 0 or v["scale"] <= 0:
            raise ParameterError("line needs sigma > 0 and scale > 0")
        lo, hi = self.support
        grid = np.linspace(lo, hi, self.GRID)
        vals, slopes = self.raw_profile(grid, derivative=True)
        spline = CubicHermiteSpline(grid, vals, slopes)
        anti = spline.antiderivative()
        total = float(anti(hi))
        if not total > 1e-300:
            raise DegenerateLineError(f"line at mu={v['mu']} has no mass on {self.support}")
        self._spline, self._anti, self._total = spline, anti, total

    def raw_profile(self, x, derivative=False):
        """Unnormalized convolution integral evaluated by quadrature."""
        v = self._values
        t, w = _gl_reference(self.W_NODES)
        half = 8.0 * v["sigma"]
        w0 = v["mu"] + half * t
        gauss = np.exp(-0.5 * ((w0 - v["mu"]) / v["sigma"]) ** 2) * w * half
        d = np.asarray(x, dtype=float)[:, None] - w0[None, :]
        vals = _moffat(d, v["scale"], v["power"]) @ gauss
        if not derivative:
            return vals
        return vals, _moffat_deriv(d, v["scale"], v["power"]) @ gauss

    def _pdf(self, x):
        return np.maximum(self._spline(x), 0.0) / self._total

    def _cdf(self, x):
        return self._anti(x) / self._total

    def _score_all(self, x):
        return {}


def convolved_line_model(mu, sigma, moffat_scale, moffat_power, support):
    lo, hi = support
    return [ConvolvedLine(m, s, lo, hi, moffat_scale, moffat_power) for m, s in zip(mu, sigma)]
