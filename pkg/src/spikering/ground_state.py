"""Radial ground-state solver for -Delta w + w = w^p on R^d.

The positive decaying radial solution solves

    w'' + (d-1)/r w' - w + w^p = 0,   w'(0) = 0,

and is found by bisection on the shooting value w(0): too small and the
trajectory turns back up before reaching zero, too large and it crosses
zero.  The far field follows the decay law

    w(r) = C r^((1-d)/2) e^{-r} (1 + o(1)),

which is used verbatim beyond ``tail_start`` (for d=3, p=3 the correction
is O(e^{-2r}), so the model is essentially exact there).

The returned profile carries knot tables for fast interpolation plus a
dense integrator solution for oracle-grade residual checks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.special import expn

from .backends import hermite_tail_eval
from .errors import BracketFailure, NonDecay

_R_START = 1e-8          # series start radius; avoids the (d-1)/r singularity
_KNOT_H = 0.005          # knot spacing on the shooting range
_TAIL_KNOT_H = 0.025     # knot spacing on the tail-model range
_TAIL_DROP = 1e-4        # tail_start = first radius with w < _TAIL_DROP * w(0)


@dataclass(frozen=True)
class RadialProfile:
    """Tabulated ground state with derivative and exponential-tail model."""

    dim: int
    power: float
    knots: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    tail_c: float
    tail_start: float
    w0: float
    r_max: float
    bracket: tuple[float, float, int]          # final (lo, hi, iterations)
    dense: object | None = field(default=None, repr=False, compare=False)

    @property
    def halfdm1(self) -> float:
        return 0.5 * (self.dim - 1)


def _rhs(dim: int, power: float):
    dm1 = dim - 1

    def rhs(r, y):
        w, dw = y
        return (dw, w - np.sign(w) * np.abs(w) ** power - dm1 * dw / r)

    return rhs


def _series_start(w0: float, dim: int, power: float) -> tuple[float, float]:
    # w(r) ~ w0 + (w0 - w0^p) r^2 / (2d) near the origin
    c = (w0 - w0 ** power) / (2.0 * dim)
    r0 = _R_START
    return w0 + c * r0 * r0, 2.0 * c * r0


def _classify_shot(w0: float, dim: int, power: float, r_max: float,
                   rtol: float = 1e-12) -> int:
    """+1 if the shot turns upward while positive (w0 too small), -1 if it
    crosses zero (w0 too large)."""

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    def turn_up(r, y):
        return y[1] if r > 0.1 else -1.0

    turn_up.terminal = True
    turn_up.direction = 1

    y0 = _series_start(w0, dim, power)
    sol = solve_ivp(_rhs(dim, power), (_R_START, r_max), y0, method="RK45",
                    rtol=rtol, atol=1e-14, events=(hit_zero, turn_up),
                    dense_output=False)
    if sol.t_events[0].size:
        return -1
    if sol.t_events[1].size:
        return +1
    # ran to r_max without crossing: decayed monotonically, treat as "small"
    return +1 if sol.y[0, -1] > 0 else -1


def solve_ground_state(dim: int, power: float, tol: float,
                       r_max: float) -> RadialProfile:
    """Shoot for w(0), then tabulate the profile with its tail model.

    Parameters
    ----------
    dim, power : problem dimension d and nonlinearity exponent p
        (Sobolev-subcritical: 1 < p, and p < (d+2)/(d-2) for d >= 3).
    tol : bisection width for w(0); must lie in (0, 1e-4].
    r_max : outer radius of the tabulated profile.
    """
    if not (0 < tol <= 1e-4):
        raise ValueError("tol must lie in (0, 1e-4]")
    if dim >= 3 and not (1 < power < (dim + 2) / (dim - 2)):
        raise ValueError("power outside the subcritical range")
    if dim < 3 and power <= 1:
        raise ValueError("power must exceed 1")

    lo, hi = 1.0, 10.0 * (dim + 1)
    if _classify_shot(lo, dim, power, r_max) != +1 or \
            _classify_shot(hi, dim, power, r_max) != -1:
        raise BracketFailure(
            f"no sign change of the shooting functional on [{lo}, {hi}]")

    iters = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _classify_shot(mid, dim, power, r_max) == +1:
            lo = mid
        else:
            hi = mid
        iters += 1
    w0 = 0.5 * (lo + hi)

    # Dense integration at the bisected shooting value.  Stop once the
    # profile has dropped four decades; past that point the unstable e^{+r}
    # contamination of the finite-precision w(0) would take over, and the
    # asymptotic tail model is already accurate.
    drop = _TAIL_DROP * w0

    def dropped(r, y):
        return y[0] - drop

    dropped.terminal = True
    dropped.direction = -1

    y0 = _series_start(w0, dim, power)
    sol = solve_ivp(_rhs(dim, power), (_R_START, r_max), y0, method="DOP853",
                    rtol=1e-13, atol=1e-16, events=(dropped,),
                    dense_output=True)
    if not sol.t_events[0].size:
        raise NonDecay(
            f"solution never fell below {_TAIL_DROP} * w(0) before r_max")
    tail_start = float(sol.t_events[0][0])

    knots = np.arange(0.0, tail_start, _KNOT_H)
    knots[0] = _R_START
    vals, ders = sol.sol(knots)
    knots[0] = 0.0
    ders[0] = 0.0

    # Tail constant by least squares of log(w r^{(d-1)/2}) + r over the last
    # decade of knots (w between w(tail_start) and 10 w(tail_start)).
    halfdm1 = 0.5 * (dim - 1)
    win = vals <= 10.0 * drop
    logc = np.log(vals[win]) + halfdm1 * np.log(knots[win]) + knots[win]
    tail_c = float(np.exp(np.mean(logc)))

    tail_knots = np.arange(knots[-1] + _TAIL_KNOT_H, r_max + _TAIL_KNOT_H / 2,
                           _TAIL_KNOT_H)
    tv = tail_c * tail_knots ** (-halfdm1) * np.exp(-tail_knots)
    td = -tv * (1.0 + halfdm1 / tail_knots)

    profile = RadialProfile(
        dim=dim, power=float(power),
        knots=np.concatenate([knots, tail_knots]),
        values=np.concatenate([vals, tv]),
        derivs=np.concatenate([ders, td]),
        tail_c=tail_c, tail_start=float(knots[-1]), w0=float(w0),
        r_max=float(r_max), bracket=(float(lo), float(hi), iters),
        dense=sol.sol)
    return profile


def solve_ground_state_rk4(dim: int, power: float, tol: float, r_max: float,
                           step: float = 2e-3) -> float:
    """Independent lower-order oracle: fixed-step classic RK4 bisection.

    Returns only the shooting value w(0); used to cross-check the adaptive
    solver.
    """

    def classify(w0: float) -> int:
        rhs = _rhs(dim, power)
        r = _R_START
        y = np.array(_series_start(w0, dim, power))
        while r < r_max:
            h = step
            k1 = np.array(rhs(r, y))
            k2 = np.array(rhs(r + h / 2, y + h / 2 * k1))
            k3 = np.array(rhs(r + h / 2, y + h / 2 * k2))
            k4 = np.array(rhs(r + h, y + h * k3))
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            r += h
            if y[0] <= 0:
                return -1
            if r > 0.1 and y[1] >= 0:
                return +1
        return +1 if y[0] > 0 else -1

    lo, hi = 1.0, 10.0 * (dim + 1)
    if classify(lo) != +1 or classify(hi) != -1:
        raise BracketFailure("rk4 oracle found no bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(mid) == +1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def eval_profile(profile: RadialProfile, r) -> tuple[np.ndarray, np.ndarray]:
    """Cubic-Hermite value and derivative; tail model beyond tail_start."""
    val, der = hermite_tail_eval(r, profile.knots, profile.values,
                                 profile.derivs, profile.tail_start,
                                 profile.tail_c, profile.halfdm1)
    if np.isscalar(r) or np.asarray(r).ndim == 0:
        return float(val[0]), float(der[0])
    return val, der


def scaled_w(profile: RadialProfile, mu3: float, r):
    """W = W*/sqrt(mu3), solving -Delta w + w = mu3 w^3."""
    if mu3 <= 0:
        raise ValueError("mu3 must be positive")
    val, _ = eval_profile(profile, r)
    return val / np.sqrt(mu3)


def ode_residual(profile: RadialProfile, rs, fd_step: float = 1e-3):
    """Residual w'' + (d-1)/r w' - w + w^p at the given radii.

    w'' is recovered by a 4th-order central difference of the profile's
    derivative (dense integrator output when available, Hermite table
    otherwise), so the check is independent of the ODE right-hand side.
    Points with r < tail_start use the reflection w'(-r) = -w'(r) so the
    stencil is valid through r = 0.
    """
    rs = np.atleast_1d(np.asarray(rs, dtype=np.float64))

    if profile.dense is not None:
        t_hi = profile.tail_start

        def w_and_dw(r):
            r = np.asarray(r)
            out_v = np.empty_like(r)
            out_d = np.empty_like(r)
            core = r <= t_hi
            if np.any(core):
                v, d = profile.dense(r[core])
                out_v[core] = v
                out_d[core] = d
            if np.any(~core):
                v, d = eval_profile(profile, r[~core])
                out_v[~core] = v
                out_d[~core] = d
            return out_v, out_d
    else:
        def w_and_dw(r):
            return eval_profile(profile, np.asarray(r))

    e = fd_step

    def dw_signed(r):
        # odd reflection of w' through the origin
        sgn = np.where(r < 0, -1.0, 1.0)
        _, d = w_and_dw(np.abs(r))
        return sgn * d

    w, dw = w_and_dw(rs)
    d2w = (-dw_signed(rs + 2 * e) + 8 * dw_signed(rs + e)
           - 8 * dw_signed(rs - e) + dw_signed(rs - 2 * e)) / (12 * e)

    res = np.empty_like(rs)
    at0 = rs < 1e-12
    dm1 = profile.dim - 1
    res[~at0] = (d2w[~at0] + dm1 * dw[~at0] / rs[~at0] - w[~at0]
                 + np.abs(w[~at0]) ** profile.power * np.sign(w[~at0]))
    if np.any(at0):
        # (d-1)/r w' -> (d-1) w''(0)
        res[at0] = (profile.dim * d2w[at0] - w[at0] + w[at0] ** profile.power)
    return res


def radial_moment(profile: RadialProfile, power: int) -> float:
    """Integral of W*^power over R^dim (4 pi int w^q r^2 dr for d=3).

    Gauss-Legendre panels on the knot intervals resolve the core; the tail
    beyond the last knot is added in closed form from the exponential model
    (exponential-integral terms for d=3).
    """
    if power not in (2, 3, 4):
        raise ValueError("power must be 2, 3, or 4")
    d = profile.dim
    surf = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[d]

    def integrand(r):
        v, _ = eval_profile(profile, r)
        return v ** power * r ** (d - 1)

    val, _ = quad(integrand, 0.0, profile.knots[-1], limit=400,
                  epsabs=1e-13, epsrel=1e-12)
    val += _tail_moment(profile, power, profile.knots[-1])
    return surf * val


def _tail_moment(profile: RadialProfile, q: int, t: float) -> float:
    """int_t^inf (C r^{(1-d)/2} e^{-r})^q r^{d-1} dr in closed form."""
    d = profile.dim
    c = profile.tail_c ** q
    a = (d - 1) * (1 - q / 2.0)  # exponent of r in the integrand; <= 0 here
    if abs(a) < 1e-14:
        return c * np.exp(-q * t) / q
    if abs(a - round(a)) > 1e-14 or a > 0:
        raise NotImplementedError(f"tail moment exponent {a} unsupported")
    n = int(round(-a))
    return c * t ** (1 - n) * expn(n, q * t)


def radial_moment_simpson(profile: RadialProfile, power: int,
                          h: float = 0.002) -> float:
    """Second quadrature route (composite Simpson) for cross-checking."""
    if power not in (2, 3, 4):
        raise ValueError("power must be 2, 3, or 4")
    d = profile.dim
    surf = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[d]
    t = profile.knots[-1]
    n = int(np.ceil(t / h)) | 1  # odd panel count for Simpson
    rs = np.linspace(0.0, t, n + 1)
    v, _ = eval_profile(profile, rs)
    f = v ** power * rs ** (d - 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    val = float(np.sum(w * f)) * (rs[1] - rs[0]) / 3.0
    return surf * (val + _tail_moment(profile, power, t))


# ---------------------------------------------------------------------------
# CSV (r, w, w') + JSON header export
# ---------------------------------------------------------------------------

def export_profile(profile: RadialProfile, csv_path, json_path) -> None:
    csv_path, json_path = Path(csv_path), Path(json_path)
    with csv_path.open("w") as fh:
        fh.write("r,w,dw\n")
        for r, w, dw in zip(profile.knots, profile.values, profile.derivs):
            fh.write(f"{r!r},{w!r},{dw!r}\n")
    header = {
        "dim": profile.dim, "power": profile.power,
        "tail_c": profile.tail_c, "tail_start": profile.tail_start,
        "w0": profile.w0, "r_max": profile.r_max,
        "bracket": list(profile.bracket),
    }
    json_path.write_text(json.dumps(header, indent=2))


def import_profile(csv_path, json_path) -> RadialProfile:
    header = json.loads(Path(json_path).read_text())
    rows = Path(csv_path).read_text().strip().splitlines()[1:]
    data = np.array([[float(x) for x in row.split(",")] for row in rows])
    return RadialProfile(
        dim=int(header["dim"]), power=float(header["power"]),
        knots=data[:, 0], values=data[:, 1], derivs=data[:, 2],
        tail_c=float(header["tail_c"]), tail_start=float(header["tail_start"]),
        w0=float(header["w0"]), r_max=float(header["r_max"]),
        bracket=tuple(header["bracket"]), dense=None)
