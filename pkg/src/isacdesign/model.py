"""Problem model: configuration, shift matrices, CP channel, symbols, steering.

Conventions
-----------
* ``X`` is ``(n_tx, T)``, ``F`` is ``(n_rx, T)``, every ``C_k``/``U_k``/``R_d``
  is ``(n_tx, n_rx)``.
* The waveform vector ``x`` stacks the *rows* of ``X`` (``X.reshape(-1)``).
* ``J_k`` has ``J_k[i, j] = 1`` iff ``j == (i + k) mod T``, so that
  ``X @ J_k == np.roll(X, k, axis=1)`` for every lag ``k`` (positive or negative).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import circulant

# d / lambda for the half-wavelength ULA
ELEMENT_SPACING = 0.5


@dataclass(frozen=True)
class ProblemConfig:
    """All dimensions, weights and algorithm knobs of one design run.

    Defaults are the standard evaluation point
    (8x8 arrays, 4 users, T=64, K=6, 30 dB PSLR, alpha=0.2, SNR=6 dB).
    """

    n_tx: int = 8
    n_rx: int = 8
    n_users: int = 4
    block_len: int = 64
    cp_len: int = 6
    k_max: int = 6
    pslr_db: float = 30.0
    alpha: float = 0.2
    p_x: float = 1.0
    p_f: float = 64.0
    sigma_n2: float = 10 ** (-0.6)
    delta: float = 0.965
    gamma: float = 1.1
    beta: float = 1.0
    u_max: float = 1e3
    rho0: float = 1e-3
    max_outer: int = 500
    max_inner: int = 50
    seed: int = 0
    # --- presets and algorithm extras ---
    # desired response preset: "directional" or "omni"
    beampattern: str = "directional"
    bp_centers_deg: tuple[float, ...] = (0.0,)
    bp_width_deg: float = 20.0
    # exponential power-delay-profile decay (taps); None -> cp_len / 3
    l_decay: float | None = None
    squarem: bool = False
    # seed of the feasible point, shared by every Monte-Carlo run
    feas_seed: int = 12345
    feas_sweeps: int = 10
    feas_rounds: int = 100

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_users", "block_len", "k_max", "max_outer", "max_inner",
                     "feas_sweeps", "feas_rounds"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.cp_len < 0 or self.cp_len >= self.block_len:
            raise ValueError(f"cp_len must satisfy 0 <= cp_len < block_len, got {self.cp_len}")
        if self.k_max >= self.block_len:
            raise ValueError(f"k_max must be < block_len, got {self.k_max}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        for name in ("p_x", "p_f", "sigma_n2", "beta", "u_max", "rho0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        # gamma == 1 is the fixed-penalty comparator
        if not self.gamma >= 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.beampattern not in ("directional", "omni"):
            raise ValueError(f"beampattern must be 'directional' or 'omni', got {self.beampattern!r}")
        if self.l_decay is not None and not self.l_decay > 0:
            raise ValueError(f"l_decay must be > 0, got {self.l_decay}")
        xi = psl_threshold(self)
        if not (np.isfinite(xi) and xi > 0):
            raise ValueError(f"pslr_db={self.pslr_db} gives a non-positive sidelobe threshold")

    @property
    def p_total(self) -> float:
        """Waveform energy ``||X||_F^2 = n_tx * T * p_x**2``."""
        return self.n_tx * self.block_len * self.p_x ** 2

    @property
    def lags(self) -> np.ndarray:
        return lag_set(self.k_max)

    def replace(self, **changes) -> "ProblemConfig":
        return dataclasses.replace(self, **changes)


def psl_threshold(cfg: ProblemConfig) -> float:
    """Per-lag sidelobe bound ``xi = sqrt(T * n_tx) * 10**(-pslr_db / 20)``."""
    return float(np.sqrt(cfg.block_len * cfg.n_tx) * 10.0 ** (-cfg.pslr_db / 20.0))


def lag_set(k_max: int) -> np.ndarray:
    """Ordered lag set ``[1, ..., K, -1, ..., -K]``.

    Positive lags first in ascending order, then the negative ones; this is
    the order in which the auxiliary blocks are swept.
    """
    pos = np.arange(1, k_max + 1)
    return np.concatenate([pos, -pos])


@dataclass(frozen=True)
class ShiftMatrixSet:
    k_indices: tuple[int, ...]
    matrices: dict

    def __getitem__(self, k: int) -> np.ndarray:
        return self.matrices[k]


def shift_matrix(T: int, k: int) -> np.ndarray:
    J = np.zeros((T, T))
    rows = np.arange(T)
    J[rows, (rows + k) % T] = 1.0
    return J


def build_shift_matrices(T: int, K: int) -> ShiftMatrixSet:
    if K < 1 or K >= T:
        raise ValueError(f"need 1 <= K < T, got K={K}, T={T}")
    ks = tuple(int(k) for k in sorted(lag_set(K)))
    return ShiftMatrixSet(ks, {k: shift_matrix(T, k) for k in ks})


@dataclass(frozen=True)
class ChannelMatrix:
    H: np.ndarray
    taps: np.ndarray  # (n_users, n_tx, L + 1)

    def link(self, m: int, n: int) -> np.ndarray:
        T = self.H.shape[1] // self.taps.shape[1]
        return self.H[m * T:(m + 1) * T, n * T:(n + 1) * T]


def build_cp_channel(taps, T: int, L: int) -> ChannelMatrix:
    """Assemble the effective block channel after CP insertion and removal.

    ``taps`` has shape ``(n_users, n_tx, L + 1)``. Each effective link matrix is
    circulant with first column ``[h_0, ..., h_L, 0, ..., 0]``.
    """
    taps = np.asarray(taps, dtype=complex)
    if taps.ndim == 1:
        taps = taps[None, None, :]
    if taps.ndim != 3 or taps.shape[2] != L + 1:
        raise ValueError(f"tap vectors must have length L+1={L + 1}, got shape {taps.shape}")
    if L >= T:
        raise ValueError(f"CP length L={L} must be < T={T}")
    n_users, n_tx, _ = taps.shape
    H = np.zeros((n_users * T, n_tx * T), dtype=complex)
    col = np.zeros(T, dtype=complex)
    for m in range(n_users):
        for n in range(n_tx):
            col[:] = 0
            col[:L + 1] = taps[m, n]
            H[m * T:(m + 1) * T, n * T:(n + 1) * T] = circulant(col)
    return ChannelMatrix(H, taps)


def delay_profile(L: int, l_decay: float | None = None) -> np.ndarray:
    """Exponential power-delay profile over ``L + 1`` taps, summing to one."""
    if L == 0:
        return np.ones(1)
    decay = L / 3.0 if l_decay is None else l_decay
    p = np.exp(-np.arange(L + 1) / decay)
    return p / p.sum()


def sample_channel(cfg: ProblemConfig, rng: np.random.Generator) -> ChannelMatrix:
    p = delay_profile(cfg.cp_len, cfg.l_decay)
    shape = (cfg.n_users, cfg.n_tx, cfg.cp_len + 1)
    g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return build_cp_channel(g * np.sqrt(p), cfg.block_len, cfg.cp_len)


QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2)


def sample_symbols(cfg: ProblemConfig, rng: np.random.Generator) -> np.ndarray:
    """Unit-power QPSK symbol matrix of shape ``(n_users, T)``."""
    return QPSK[rng.integers(0, 4, size=(cfg.n_users, cfg.block_len))]


def steering(theta, n: int) -> np.ndarray:
    """Half-wavelength ULA steering vector(s), entry ``m`` = ``exp(-j pi m sin(theta))``.

    A scalar ``theta`` gives shape ``(n,)``; an array gives ``(len(theta), n)``.
    """
    if n < 1:
        raise ValueError("steering vector length must be >= 1")
    theta = np.asarray(theta, dtype=float)
    m = np.arange(n)
    return np.exp(-2j * np.pi * ELEMENT_SPACING * np.multiply.outer(np.sin(theta), m))


def angle_grid(n_points: int = 181) -> np.ndarray:
    """Uniform grid over [-90, 90] degrees, in radians."""
    return np.deg2rad(np.linspace(-90.0, 90.0, n_points))


def _centre_phase(theta, n):
    return np.exp(2j * np.pi * ELEMENT_SPACING * (n - 1) / 2 * np.sin(theta))[:, None]


def build_desired_response(cfg: ProblemConfig, preset: str | None = None,
                           centers_deg: Sequence[float] | None = None,
                           width_deg: float | None = None, grid_step_deg: float = 0.5) -> np.ndarray:
    """Desired spatial response ``R_d`` of shape ``(n_tx, n_rx)``.

    ``omni`` gives ``(P_X / n_tx) I``. ``directional`` is a least-squares stand-in
    for a proper beampattern synthesis: the average of ``conj(v(theta)) a(theta)^H``
    (phase-centred) over a uniform grid of every mainlobe interval, scaled to
    ``||R_d||_F^2 = P_X * n_rx / n_tx``.
    """
    preset = cfg.beampattern if preset is None else preset
    P_X = cfg.p_total
    if preset == "omni":
        if cfg.n_tx != cfg.n_rx:
            # rectangular identity for mismatched arrays
            return (P_X / cfg.n_tx) * np.eye(cfg.n_tx, cfg.n_rx, dtype=complex)
        return (P_X / cfg.n_tx) * np.eye(cfg.n_tx, dtype=complex)
    if preset != "directional":
        raise ValueError(f"unknown beampattern preset {preset!r}")
    centers = cfg.bp_centers_deg if centers_deg is None else centers_deg
    width = cfg.bp_width_deg if width_deg is None else width_deg
    angles = []
    for c in centers:
        n = int(np.floor(width / grid_step_deg)) + 1
        if width <= 0:
            angles.append(np.array([c]))
        else:
            angles.append(np.linspace(c - width / 2, c + width / 2, n))
    grid = np.deg2rad(np.concatenate(angles)) if angles else np.empty(0)
    if grid.size == 0:
        raise ValueError("empty mainlobe grid")
    # phase-centred steering vectors: the per-angle rank-one responses then add
    # coherently inside the sector instead of cancelling at its centre
    V = steering(grid, cfg.n_tx) * _centre_phase(grid, cfg.n_tx)
    A = steering(grid, cfg.n_rx) * _centre_phase(grid, cfg.n_rx)
    R = (P_X / grid.size) * np.einsum("gi,gj->ij", V.conj(), A.conj())
    norm = np.linalg.norm(R)
    if norm == 0:
        raise ValueError("mainlobe grid produced a zero response")
    return R * np.sqrt(P_X * cfg.n_rx / cfg.n_tx) / norm


def power_iteration(A: np.ndarray, max_iter: int = 200, tol: float = 1e-10,
                    rng: np.random.Generator | None = None) -> float:
    """Largest eigenvalue of a Hermitian PSD matrix by power iteration."""
    rng = np.random.default_rng(0) if rng is None else rng
    n = A.shape[0]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        lam_new = float(np.real(np.vdot(v, w)))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if lam_new > 0 and abs(lam_new - lam) <= tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam


def circulant_gram(taps: np.ndarray, T: int) -> np.ndarray:
    """Per-frequency blocks ``G_f = Hf_f^H Hf_f`` of ``H^H H``, shape ``(T, n_tx, n_tx)``."""
    Hf = np.moveaxis(np.fft.fft(taps, n=T, axis=2), 2, 0)  # (T, n_users, n_tx)
    return Hf.conj().transpose(0, 2, 1) @ Hf


def circulant_lambda_max(taps: np.ndarray, T: int) -> float:
    """Exact ``lambda_max(H^H H)`` from the per-frequency decomposition of a CP channel."""
    return float(np.linalg.eigvalsh(circulant_gram(taps, T)).max())


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Frozen per-run inputs plus the cached quantities every sweep needs."""

    cfg: ProblemConfig
    channel: ChannelMatrix
    S: np.ndarray
    R_d: np.ndarray
    lags: np.ndarray
    xi: float
    HtH: np.ndarray = field(repr=False)
    Hts: np.ndarray = field(repr=False)
    s_energy: float
    lam_h: float
    hth_fro: float
    # per-frequency n_tx x n_tx blocks of H^H H, shape (T, n_tx, n_tx)
    hth_freq: np.ndarray = field(repr=False)

    @property
    def H(self) -> np.ndarray:
        return self.channel.H

    def apply_hth(self, x: np.ndarray) -> np.ndarray:
        """``H^H H x`` through the block-circulant structure (two FFTs per antenna)."""
        n_tx = self.cfg.n_tx
        Xf = np.fft.fft(x.reshape(n_tx, -1), axis=1)
        Yf = np.einsum("fab,bf->af", self.hth_freq, Xf)
        return np.fft.ifft(Yf, axis=1).reshape(-1)

    @property
    def s(self) -> np.ndarray:
        return self.S.reshape(-1)


def make_problem(cfg: ProblemConfig, channel: ChannelMatrix, S: np.ndarray,
                 R_d: np.ndarray | None = None) -> ProblemData:
    """Bundle inputs and precompute ``H^H H``, ``H^H s`` and ``lambda_max(H^H H)``."""
    if R_d is None:
        R_d = build_desired_response(cfg)
    H = channel.H
    T = cfg.block_len
    if H.shape != (cfg.n_users * T, cfg.n_tx * T):
        raise ValueError(f"channel shape {H.shape} does not match the configuration")
    if S.shape != (cfg.n_users, T):
        raise ValueError(f"symbol matrix shape {S.shape} does not match the configuration")
    if R_d.shape != (cfg.n_tx, cfg.n_rx):
        raise ValueError(f"R_d shape {R_d.shape} does not match the configuration")
    HtH = H.conj().T @ H
    s = S.reshape(-1)
    lam_power = power_iteration(HtH)
    # power iteration approaches lambda_max from below; the majorizer needs an upper
    # bound, so take the exact circulant value when it is available
    lam_h = max(lam_power, circulant_lambda_max(channel.taps, T))
    for a in (HtH, R_d, S):
        a.setflags(write=False)
    return ProblemData(
        cfg=cfg, channel=channel, S=S, R_d=R_d, lags=cfg.lags, xi=psl_threshold(cfg),
        HtH=HtH, Hts=H.conj().T @ s, s_energy=float(np.vdot(s, s).real),
        lam_h=float(lam_h), hth_fro=float(np.linalg.norm(HtH)),
        hth_freq=circulant_gram(channel.taps, T),
    )


def sample_problem(cfg: ProblemConfig, seed: int | None = None) -> ProblemData:
    """Draw channel and symbols for ``seed`` (default ``cfg.seed``)."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    channel = sample_channel(cfg, rng)
    S = sample_symbols(cfg, rng)
    return make_problem(cfg, channel, S)
