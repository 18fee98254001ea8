"""Physical parameters: couplings, synchronized amplitudes, potentials.

The synchronized pair (U, V) = (alpha W*, gamma W*) exists exactly when

    beta12 in (-sqrt(mu1 mu2), min(mu1, mu2)) U (max(mu1, mu2), inf),

with amplitudes alpha^2 = (mu2 - beta12)/(mu1 mu2 - beta12^2) and
gamma^2 = (mu1 - beta12)/(mu1 mu2 - beta12^2).  Interval endpoints are
rejected: the amplitude formulas degenerate there.

Radial potentials are power-law tails P(r) = 1 + a/r^m for r >= r_cut,
clamped to max(0, 1 + a/r_cut^m) below r_cut so that P stays bounded and
nonnegative everywhere (only the tail is physically prescribed).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum

import numpy as np

from .errors import ConfigError, InadmissibleCoupling

_SYNC_TOL = 1e-12


def admissible_intervals(mu1: float, mu2: float) -> tuple[tuple[float, float],
                                                          tuple[float, float]]:
    root = np.sqrt(mu1 * mu2)
    return (-root, min(mu1, mu2)), (max(mu1, mu2), np.inf)


def beta12_admissible(mu1: float, mu2: float, beta12: float) -> bool:
    (a, b), (c, _) = admissible_intervals(mu1, mu2)
    return (a < beta12 < b) or (beta12 > c)


def derive_sync_coefficients(mu1: float, mu2: float,
                             beta12: float) -> tuple[float, float]:
    """Amplitudes (alpha, gamma) of the synchronized pair (alpha W*, gamma W*)."""
    if mu1 <= 0 or mu2 <= 0:
        raise ValueError("mu coefficients must be positive")
    if not beta12_admissible(mu1, mu2, beta12):
        raise InadmissibleCoupling(
            f"beta12={beta12} outside (-sqrt(mu1 mu2), min mu) U (max mu, inf); "
            "the synchronized pair does not exist")
    den = mu1 * mu2 - beta12 ** 2
    alpha = np.sqrt((mu2 - beta12) / den)
    gamma = np.sqrt((mu1 - beta12) / den)
    return float(alpha), float(gamma)


@dataclass(frozen=True)
class SystemParams:
    """Intraspecies coefficients, couplings, and derived amplitudes."""

    mu: tuple[float, float, float]
    beta12: float
    beta13: float
    beta23: float
    alpha: float
    gamma: float

    @classmethod
    def create(cls, mu: tuple[float, float, float], beta12: float,
               beta13: float = 0.0, beta23: float = 0.0) -> "SystemParams":
        mu = tuple(float(m) for m in mu)
        if any(m <= 0 for m in mu):
            raise ValueError("all mu_j must be positive")
        alpha, gamma = derive_sync_coefficients(mu[0], mu[1], beta12)
        return cls(mu=mu, beta12=float(beta12), beta13=float(beta13),
                   beta23=float(beta23), alpha=alpha, gamma=gamma)

    def __post_init__(self):
        mu1, mu2, _ = self.mu
        den = mu1 * mu2 - self.beta12 ** 2
        for amp, num in ((self.alpha, mu2 - self.beta12),
                         (self.gamma, mu1 - self.beta12)):
            if amp <= 0:
                raise ValueError("synchronized amplitudes must be positive")
            if abs(amp * amp * den - num) > _SYNC_TOL * max(abs(num), 1.0):
                raise ValueError("amplitudes inconsistent with couplings")


class TailForm(Enum):
    EXACT_POWER = "exact_power"


@dataclass(frozen=True)
class PotentialSpec:
    """P(r) = 1 + a/r^m far field, clamped below r_cut."""

    a: float
    m: float
    sigma: float
    tail_form: TailForm = TailForm.EXACT_POWER
    r_cut: float = 1.0

    def __post_init__(self):
        if self.m <= 1:
            raise ValueError("decay exponent m must exceed 1")
        if self.sigma <= 0:
            raise ValueError("remainder exponent sigma must be positive")
        if self.r_cut <= 0:
            raise ValueError("r_cut must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=np.float64)
        rr = np.maximum(r, self.r_cut)
        return np.maximum(0.0, 1.0 + self.a / rr ** self.m)

    @property
    def trivial(self) -> bool:
        return self.a == 0.0


def trivial_potentials() -> tuple[PotentialSpec, PotentialSpec, PotentialSpec]:
    p = PotentialSpec(a=0.0, m=2.0, sigma=1.0)
    return (p, p, p)


class HypothesisVariant(Enum):
    HM_I = "Hm_i"
    HM_II = "Hm_ii"
    HTILDE_III = "Htilde_iii"
    HTILDE_IV = "Htilde_iv"
    NONE = "none"


@dataclass(frozen=True)
class HypothesisTag:
    variant: HypothesisVariant

    @property
    def maximizing(self) -> bool:
        return self.variant in (HypothesisVariant.HM_I, HypothesisVariant.HM_II)

    @property
    def minimizing(self) -> bool:
        return self.variant in (HypothesisVariant.HTILDE_III,
                                HypothesisVariant.HTILDE_IV)


def classify_hypothesis(params: SystemParams,
                        potentials) -> HypothesisTag:
    """Match the potential triple against the sign/exponent hypotheses.

    The unequal-exponent cases (i)/(iii) apply only when m1 != m2; with all
    exponents equal the amplitude-weighted cases (ii)/(iv) decide.
    """
    p1, p2, p3 = potentials
    m1, m2, m3 = p1.m, p2.m, p3.m
    a1, a2, a3 = p1.a, p2.a, p3.a
    if m1 == m2 == m3:
        combo = a1 * params.alpha ** 2 + a2 * params.gamma ** 2
        if combo > 0 and a3 > 0:
            return HypothesisTag(HypothesisVariant.HM_II)
        if combo < 0 and a3 < 0:
            return HypothesisTag(HypothesisVariant.HTILDE_IV)
        return HypothesisTag(HypothesisVariant.NONE)
    if m1 != m2 and m3 == min(m1, m2):
        lead_a = a1 if m1 < m2 else a2
        if a3 > 0 and lead_a > 0:
            return HypothesisTag(HypothesisVariant.HM_I)
        if a3 < 0 and lead_a < 0:
            return HypothesisTag(HypothesisVariant.HTILDE_III)
    return HypothesisTag(HypothesisVariant.NONE)


# ---------------------------------------------------------------------------
# Structured text config: [mu] / [beta] / [potential.j] sections, key = value.
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = """\
[mu]
mu1 = 1.0
mu2 = 1.0
mu3 = 1.0

[beta]
beta12 = 0.5
beta13 = 0.0
beta23 = 0.0

[potential.1]
a = 0.0
m = 2.0
sigma = 1.0

[potential.2]
a = 0.0
m = 2.0
sigma = 1.0

[potential.3]
a = 0.0
m = 2.0
sigma = 1.0
"""

_SECTION_RE = re.compile(r"^\[([a-zA-Z0-9_.]+)\]$")
_KEY_RE = re.compile(r"^([a-zA-Z0-9_]+)\s*=\s*(\S+)$")

_EXPECTED = {
    "mu": {"mu1", "mu2", "mu3"},
    "beta": {"beta12", "beta13", "beta23"},
    "potential.1": {"a", "m", "sigma"},
    "potential.2": {"a", "m", "sigma"},
    "potential.3": {"a", "m", "sigma"},
}


def parse_config(text: str) -> tuple[SystemParams, tuple[PotentialSpec, ...]]:
    """Parse the key = value config; errors carry 1-based line numbers."""
    values: dict[str, dict[str, float]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1)
            if section not in _EXPECTED:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            values.setdefault(section, {})
            continue
        m = _KEY_RE.match(line)
        if not m:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, sval = m.groups()
        if key not in _EXPECTED[section]:
            raise ConfigError(
                f"line {lineno}: unknown key '{key}' in [{section}]")
        try:
            val = float(Decimal(sval))
        except InvalidOperation:
            raise ConfigError(
                f"line {lineno}: '{sval}' is not a decimal number") from None
        values[section][key] = val

    for sec, keys in _EXPECTED.items():
        missing = keys - set(values.get(sec, {}))
        if missing:
            raise ConfigError(
                f"section [{sec}] missing keys: {sorted(missing)}")

    mu = (values["mu"]["mu1"], values["mu"]["mu2"], values["mu"]["mu3"])
    params = SystemParams.create(
        mu, values["beta"]["beta12"],
        values["beta"]["beta13"], values["beta"]["beta23"])
    pots = tuple(
        PotentialSpec(a=values[f"potential.{j}"]["a"],
                      m=values[f"potential.{j}"]["m"],
                      sigma=values[f"potential.{j}"]["sigma"])
        for j in (1, 2, 3))
    return params, pots
