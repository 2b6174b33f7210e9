"""Performance metrics, echo simulation and radar image formation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import ProblemData, angle_grid, steering


def mui(X: np.ndarray, data: ProblemData) -> float:
    """Multi-user interference energy ``||H x - s||^2`` (row-stacked ``x``)."""
    r = data.H @ X.reshape(-1) - data.s
    return float(np.vdot(r, r).real)


def user_mui(X: np.ndarray, data: ProblemData) -> np.ndarray:
    """Per-user interference energies ``||H_i x - s_i||^2``."""
    r = data.H @ X.reshape(-1) - data.s
    return np.sum(np.abs(r.reshape(data.cfg.n_users, -1)) ** 2, axis=1)


def sum_rate(X: np.ndarray, data: ProblemData, sigma_n2: float | None = None) -> float:
    """Sum of ``log2(1 + 1 / (||H_i x - s_i||^2 / T + sigma_n2))`` over users.

    The interference is averaged per symbol, matching unit-power symbols.
    """
    sigma_n2 = data.cfg.sigma_n2 if sigma_n2 is None else sigma_n2
    if not sigma_n2 > 0:
        raise ValueError("sigma_n2 must be > 0")
    e = user_mui(X, data) / data.cfg.block_len
    return float(np.sum(np.log2(1.0 + 1.0 / (e + sigma_n2))))


def beampattern_mse(X: np.ndarray, F: np.ndarray, R_d: np.ndarray) -> float:
    """``||X F^H - R_d||_F^2``."""
    D = X @ F.conj().T - R_d
    return float(np.vdot(D, D).real)


@dataclass(frozen=True)
class SidelobeLevels:
    lags: np.ndarray
    levels: np.ndarray  # ||X J_k F^H||_F, aligned with lags

    @property
    def peak(self) -> float:
        return float(self.levels.max())

    @property
    def isl(self) -> float:
        return float(np.sum(self.levels ** 2))

    def as_dict(self) -> dict:
        return {int(k): float(v) for k, v in zip(self.lags, self.levels)}


def sidelobe_levels(X: np.ndarray, F: np.ndarray, lags) -> SidelobeLevels:
    lags = np.asarray(lags)
    A = kernels.lag_products(X, F, lags)
    return SidelobeLevels(lags, np.sqrt(np.einsum("lij,lij->l", A.conj(), A).real))


def beampattern(X: np.ndarray, F: np.ndarray, theta: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Receive beampattern ``|v(theta)^T X F^H a(theta)|`` on ``theta`` (default 181-point grid)."""
    theta = angle_grid() if theta is None else np.asarray(theta)
    V = steering(theta, X.shape[0])
    A = steering(theta, F.shape[0])
    M = X @ F.conj().T
    return theta, np.abs(np.einsum("gi,ij,gj->g", V, M, A))


# ---------------------------------------------------------------- radar imaging


@dataclass(frozen=True)
class Scatterer:
    bin: int
    angle: float  # radians
    amp: complex


@dataclass(frozen=True)
class SceneSpec:
    """Point scatterers on a (range bin x angle) grid; bins lie in ``[-k_scene, k_scene]``."""

    scatterers: tuple
    noise_var: float = 0.0
    k_scene: int = 0

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")
        for s in self.scatterers:
            if abs(s.bin) > self.k_scene:
                raise ValueError(f"scatterer bin {s.bin} outside [-{self.k_scene}, {self.k_scene}]")
            if not np.isfinite(s.amp):
                raise ValueError("scatterer amplitude must be finite")

    @classmethod
    def from_rows(cls, rows, noise_var=0.0, k_scene=None) -> "SceneSpec":
        """Build from ``(bin, angle_deg, amp)`` tuples; ``k_scene`` defaults to the largest |bin|."""
        sc = tuple(Scatterer(int(b), float(np.deg2rad(a)), complex(h)) for b, a, h in rows)
        if k_scene is None:
            k_scene = max((abs(s.bin) for s in sc), default=0)
        return cls(sc, float(noise_var), int(k_scene))


def _target_response(s: Scatterer, n_rx: int, n_tx: int) -> np.ndarray:
    # h a(theta) v(theta)^T, shape (n_rx, n_tx)
    return s.amp * np.outer(steering(s.angle, n_rx), steering(s.angle, n_tx))


def simulate_echo(scene: SceneSpec, X: np.ndarray, n_rx: int, lags, bins=None,
                  rng: np.random.Generator | None = None) -> dict:
    """Echo matrices ``D_(i)`` (``n_rx x T``) for every range bin in ``bins``.

    A scatterer at bin ``j`` contributes to bin ``i`` through ``X J_{j - i}``
    when ``j - i`` is zero or in ``lags``; farther scatterers are outside
    the correlation window. ``bins`` defaults to ``-k_scene..k_scene``.
    """
    n_tx, T = X.shape
    lagset = {0} | {int(k) for k in lags}
    if bins is None:
        bins = range(-scene.k_scene, scene.k_scene + 1)
    bins = list(bins)
    for i in bins:
        if abs(i) > scene.k_scene:
            raise ValueError(f"range bin {i} outside the scene window")
    if scene.noise_var > 0 and rng is None:
        rng = np.random.default_rng()
    out = {}
    for i in bins:
        D = np.zeros((n_rx, T), dtype=complex)
        for s in scene.scatterers:
            k = s.bin - i
            if k in lagset:
                D += _target_response(s, n_rx, n_tx) @ np.roll(X, k, axis=1)
        if scene.noise_var > 0:
            D += np.sqrt(scene.noise_var / 2) * (rng.standard_normal(D.shape) + 1j * rng.standard_normal(D.shape))
        out[i] = D
    return out


@dataclass(frozen=True)
class RadarImage:
    angles: np.ndarray  # radians
    bins: np.ndarray
    values: np.ndarray = field(repr=False)  # (n_angles, n_bins)

    def peak(self) -> tuple[float, int]:
        a, b = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.angles[a]), int(self.bins[b])


def form_image(echo: dict, F: np.ndarray, angles: np.ndarray | None = None) -> RadarImage:
    """``r(theta, i) = |a(theta)^H D_(i) F^H a(theta)|`` on an angle grid."""
    angles = angle_grid() if angles is None else np.asarray(angles)
    if angles.size == 0 or not echo:
        raise ValueError("empty angle grid or echo set")
    bins = np.array(sorted(echo))
    A = steering(angles, F.shape[0])  # (G, n_rx)
    FhA = F.conj().T @ A.T  # (T, G)
    vals = np.empty((angles.size, bins.size))
    for j, i in enumerate(bins):
        M = echo[i] @ FhA  # (n_rx, G)
        vals[:, j] = np.abs(np.einsum("gr,rg->g", A.conj(), M))
    return RadarImage(angles, bins, vals)


def image_snr_noise_var(snr_db: float, n_tx: int, p_x: float = 1.0, amp: float = 1.0) -> float:
    """Per-entry echo noise variance for a unit scatterer at ``snr_db`` (received power ``|h|^2 n_tx p_x^2``)."""
    return float(abs(amp) ** 2 * n_tx * p_x ** 2 / 10.0 ** (snr_db / 10.0))
