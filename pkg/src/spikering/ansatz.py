"""Peak configurations and ansatz field synthesis.

Positive parity places ell synchronized peaks S^k on a ring of radius r at
angles 2(k-1)pi/ell and ell segregated peaks T^k on a ring of radius rho,
rotated by half a spacing (angles (2k-1)pi/ell).  The fields are

    u = alpha * sum_k W*(x - S^k),   v = gamma * sum_k W*(x - S^k),
    w = sum_k W*(x - T^k) / sqrt(mu3).

Sign-changing parity doubles the count: 2*ell peaks per ring with the same
two formulas read at count 2*ell (spacing pi/ell, T-ring offset pi/(2 ell))
and alternating signs (+ on S^1).  Every component then flips sign under
rotation by pi/ell.  Evenness in x2 forces the ring through theta=0 (the
S-ring) to be even and the offset ring to be odd across that plane, so the
w component is odd in x2; all components stay even in x3.

Tails are always evaluated through the profile's exponential model, never
truncated, so interaction-scale quantities remain resolvable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridTooCoarse
from .gridding import CylWedgeGrid
from .ground_state import RadialProfile, eval_profile
from .params import SystemParams

SPACING_FLOOR = 0.25


@dataclass(frozen=True)
class PolygonConfig:
    """Two-ring peak layout: ell, ring radii, and parity."""

    ell: int
    r: float
    rho: float
    parity: str = "positive"

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be a positive integer")
        if self.r <= 0 or self.rho <= 0:
            raise ValueError("ring radii must be positive")
        if self.parity not in ("positive", "sign_changing"):
            raise ValueError("parity must be positive or sign_changing")

    @property
    def n_peaks(self) -> int:
        return self.ell if self.parity == "positive" else 2 * self.ell

    @property
    def sync_seg_gap(self) -> float:
        """|S^1 - T^1| = |rho - r e^{i pi/n}| with n the per-ring count."""
        ang = np.pi / self.n_peaks
        return float(abs(self.rho - self.r * np.exp(1j * ang)))


@dataclass(frozen=True)
class DomainBox:
    """Admissible landscape square [(m3/2pi - delta) L, M L]^2, L = ell ln ell."""

    delta: float
    m_big: float
    ell: int
    m3: float

    def __post_init__(self):
        if self.delta <= 0 or self.delta >= self.m3 / (2 * np.pi):
            raise ValueError("need 0 < delta < m3/(2 pi)")
        if self.m_big <= self.m3 / (2 * np.pi) - self.delta:
            raise ValueError("upper factor M must exceed the lower one")
        if self.ell < 2:
            raise ValueError("ell must be at least 2")

    @property
    def scale(self) -> float:
        return self.ell * np.log(self.ell)

    @property
    def bounds(self) -> tuple[float, float]:
        lo = (self.m3 / (2 * np.pi) - self.delta) * self.scale
        return (lo, self.m_big * self.scale)

    def contains(self, r: float, rho: float) -> bool:
        lo, hi = self.bounds
        return lo <= r <= hi and lo <= rho <= hi


def peak_positions(config: PolygonConfig) -> tuple[np.ndarray, np.ndarray]:
    """In-plane peak coordinates (n, 3) for the S and T rings."""
    n = config.n_peaks
    k = np.arange(n)
    ang_s = 2.0 * k * np.pi / n
    ang_t = (2.0 * k + 1.0) * np.pi / n
    s = np.stack([config.r * np.cos(ang_s), config.r * np.sin(ang_s),
                  np.zeros(n)], axis=1)
    t = np.stack([config.rho * np.cos(ang_t), config.rho * np.sin(ang_t),
                  np.zeros(n)], axis=1)
    return s, t


def peak_signs(config: PolygonConfig) -> np.ndarray:
    """+1 everywhere for positive parity; alternating (+ on S^1) otherwise."""
    n = config.n_peaks
    if config.parity == "positive":
        return np.ones(n)
    return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)


def fold_angle(theta, comp: str, config: PolygonConfig):
    """Map angles into the stored wedge; returns (theta_wedge, sign).

    Encodes the symmetry class: rotation by the peak spacing multiplies by
    +1 (positive) or -1 (sign-changing); the x2-reflection is even for u, v
    and, in the sign-changing class, odd for w.
    """
    theta = np.asarray(theta, dtype=np.float64)
    n = config.n_peaks
    cell = 2.0 * np.pi / n
    kcell = np.floor(theta / cell)
    th = theta - kcell * cell
    if config.parity == "positive":
        sign = np.ones_like(th)
    else:
        sign = np.where(kcell.astype(np.int64) % 2 == 0, 1.0, -1.0)
    refl = th > cell / 2.0
    th = np.where(refl, cell - th, th)
    if config.parity == "sign_changing" and comp != "w":
        # reflection across the wedge top = rotation o x2-mirror: odd for
        # u, v; even for w (whose x2-oddness then follows by composition)
        sign = np.where(refl, -sign, sign)
    return th, sign


@dataclass(frozen=True)
class Field3:
    """Scalar sample triple on a symmetry-reduced grid.

    s3 and t3 hold sum_k sign_k W*(x-S^k)^3 and the T-ring analogue; they
    make the per-peak cubic sums of the energy decomposition available
    without storing every peak field.
    """

    grid: CylWedgeGrid
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    parity: str
    config: PolygonConfig = None
    s3: np.ndarray = field(default=None, repr=False)
    t3: np.ndarray = field(default=None, repr=False)

    def components(self):
        return (self.u, self.v, self.w)

    def copy_with(self, u=None, v=None, w=None) -> "Field3":
        return Field3(grid=self.grid,
                      u=self.u if u is None else u,
                      v=self.v if v is None else v,
                      w=self.w if w is None else w,
                      parity=self.parity, config=self.config,
                      s3=self.s3, t3=self.t3)


def ring_sum(points, centers, signs, profile: RadialProfile, power: int = 1):
    """sum_k sign_k W*(|x - c_k|)^power over the peak list."""
    x, y, z = points
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape, z.shape))
    for c, s in zip(centers, signs):
        d = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
        val, _ = eval_profile(profile, d)
        out += s * (val ** power if power != 1 else val)
    return out


def synthesize_ansatz(config: PolygonConfig, params: SystemParams,
                      profile: RadialProfile, grid: CylWedgeGrid,
                      allow_coarse: bool = False) -> Field3:
    """Evaluate the two-ring ansatz on the wedge grid."""
    if grid.spacing > SPACING_FLOOR and not allow_coarse:
        raise GridTooCoarse(
            f"grid spacing {grid.spacing} exceeds the resolution floor "
            f"{SPACING_FLOOR}")
    if grid.parity != config.parity or grid.ell != config.ell:
        raise ValueError("grid symmetry does not match the configuration")

    s_pk, t_pk = peak_positions(config)
    signs = peak_signs(config)
    pts = grid.points()
    base = ring_sum(pts, s_pk, signs, profile)
    s3 = ring_sum(pts, s_pk, signs, profile, power=3)
    wbase = ring_sum(pts, t_pk, signs, profile)
    t3 = ring_sum(pts, t_pk, signs, profile, power=3)

    mu3 = params.mu[2]
    u = params.alpha * base
    v = params.gamma * base
    w = wbase / np.sqrt(mu3)
    for name, arr in (("u", u), ("v", v), ("w", w)):
        grid.pin(name, arr)
    grid.pin("u", s3)
    grid.pin("w", t3)
    return Field3(grid=grid, u=u, v=v, w=w, parity=config.parity,
                  config=config, s3=s3, t3=t3)


# ---------------------------------------------------------------------------
# Flat binary + JSON descriptor export
# ---------------------------------------------------------------------------

def export_field(f: Field3, bin_path, json_path) -> None:
    bin_path, json_path = Path(bin_path), Path(json_path)
    data = np.concatenate([f.u.ravel(), f.v.ravel(), f.w.ravel()])
    data.astype("<f8").tofile(bin_path)
    g = f.grid
    desc = {
        "shape": list(g.shape), "spacing": g.spacing,
        "radial_extent": list(g.radial_extent), "z_extent": g.z_extent,
        "ell": g.ell, "parity": f.parity,
        "symmetry": {"even_x2": True, "even_x3": True,
                     "rotation_order": f.config.n_peaks if f.config else g.ell,
                     "w_odd_x2": f.parity == "sign_changing"},
        "config": None if f.config is None else {
            "ell": f.config.ell, "r": f.config.r, "rho": f.config.rho,
            "parity": f.config.parity},
    }
    json_path.write_text(json.dumps(desc, indent=2))


def import_field(bin_path, json_path) -> Field3:
    desc = json.loads(Path(json_path).read_text())
    grid = CylWedgeGrid(ell=desc["ell"], parity=desc["parity"],
                        spacing=desc["spacing"],
                        radial_extent=tuple(desc["radial_extent"]),
                        z_extent=desc["z_extent"])
    shape = tuple(desc["shape"])
    if list(grid.shape) != list(shape):
        raise ValueError("descriptor shape does not match rebuilt grid")
    n = int(np.prod(shape))
    data = np.fromfile(bin_path, dtype="<f8")
    u, v, w = (data[i * n:(i + 1) * n].reshape(shape) for i in range(3))
    cfg = desc.get("config")
    config = None if cfg is None else PolygonConfig(**cfg)
    return Field3(grid=grid, u=u, v=v, w=w, parity=desc["parity"],
                  config=config)
