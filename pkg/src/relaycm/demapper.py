"""Per-bit soft demapping for direct and relayed links.

LLR sign convention: positive values favor bit 0.  Outputs are clipped to
+-LLR_CLIP, and noise variances passed here are per real dimension (half
the total complex variance of the segment feeding the receiver).

The equivalent demapper folds a discrete relay channel into the metric:
the likelihood of a sent index q is the mixture over relay outputs j of
W[j, q] times the Gaussian likelihood of receiving y from symbol j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .channel import DmcMatrix
from .constellation import Constellation, bit_level_sets
from .errors import ConfigError, NumericalDegeneracyError

LLR_CLIP = 50.0
_BIN_MAGIC = b"LLRB"


@dataclass(eq=False)
class Demapper:
    """Maximum a posteriori bit metric calculator for one receiver.

    transition=None gives the conventional memoryless AWGN metric; with a
    transition matrix the metric marginalizes over relay decisions.
    """

    constellation: Constellation
    noise_var: float
    transition: DmcMatrix | None = None
    clip: float = LLR_CLIP

    def __post_init__(self):
        if not self.noise_var > 0:
            raise ConfigError("per-dimension noise variance must be positive")
        if self.transition is not None and self.transition.order != self.constellation.order:
            raise ConfigError("transition matrix order does not match constellation")

    @classmethod
    def conventional(cls, c: Constellation, snr: float) -> "Demapper":
        """Single-hop demapper for an AWGN segment at linear snr."""
        return cls(constellation=c, noise_var=0.5 / snr)

    @classmethod
    def equivalent(cls, c: Constellation, snr2: float, dmc: DmcMatrix) -> "Demapper":
        """Two-hop demapper: discrete relay stage dmc, then AWGN at snr2."""
        return cls(constellation=c, noise_var=0.5 / snr2, transition=dmc)

    def symbol_logliks(self, y) -> np.ndarray:
        """Log likelihood of each sent index for each sample, up to a
        common additive constant."""
        y = np.atleast_1d(np.asarray(y, dtype=np.complex128))
        d2 = np.abs(y[:, None] - self.constellation.symbols[None, :]) ** 2
        a = -d2 / (2.0 * self.noise_var)
        if self.transition is None:
            return a
        amax = a.max(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            return np.log(np.exp(a - amax) @ self.transition.probs) + amax

    def llrs(self, y) -> np.ndarray:
        """Per-bit LLRs, shape (n, bits_per_symbol)."""
        loglik = self.symbol_logliks(y)
        sets = bit_level_sets(self.constellation)
        m = self.constellation.bits_per_symbol
        out = np.empty((loglik.shape[0], m))
        for i in range(m):
            l0 = logsumexp(loglik[:, sets.zero[i]], axis=1)
            l1 = logsumexp(loglik[:, sets.one[i]], axis=1)
            dead = np.isneginf(l0) & np.isneginf(l1)
            if np.any(dead):
                raise NumericalDegeneracyError(
                    "sample has zero likelihood under every symbol hypothesis"
                )
            out[:, i] = l0 - l1
        return np.clip(out, -self.clip, self.clip)


def hard_bits(llrs: np.ndarray) -> np.ndarray:
    """Threshold LLRs to bits; exact zeros decide bit 0."""
    return (np.asarray(llrs) < 0).astype(np.uint8)


def save_llrs_csv(path, llrs: np.ndarray) -> None:
    """One sample per line, bit LLRs comma separated, repr precision."""
    llrs = np.atleast_2d(llrs)
    with open(path, "w") as fh:
        fh.write(f"# rows={llrs.shape[0]} bits={llrs.shape[1]}\n")
        for row in llrs:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_llrs_csv(path) -> np.ndarray:
    rows = []
    shape = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = dict(kv.split("=") for kv in line[1:].split())
                shape = (int(fields["rows"]), int(fields["bits"]))
                continue
            rows.append([float(v) for v in line.split(",")])
    out = np.array(rows)
    if shape is not None and out.shape != shape:
        raise ConfigError("LLR file header does not match its body")
    return out


def save_llrs_bin(path, llrs: np.ndarray) -> None:
    """Binary dump: 4-byte magic, two little-endian uint32 (rows, bits),
    then row-major little-endian float64 values."""
    llrs = np.ascontiguousarray(np.atleast_2d(llrs), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(np.array(llrs.shape, dtype="<u4").tobytes())
        fh.write(llrs.tobytes())


def load_llrs_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BIN_MAGIC:
            raise ConfigError("not an LLR binary file")
        n, m = np.frombuffer(fh.read(8), dtype="<u4")
        data = np.frombuffer(fh.read(int(n) * int(m) * 8), dtype="<f8")
    if data.size != int(n) * int(m):
        raise ConfigError("LLR binary file is truncated")
    return data.reshape(int(n), int(m)).astype(np.float64)


@dataclass(eq=False)
class PiecewiseLinearFit:
    """Continuous piecewise-linear approximant with fixed knot abscissae.

    ``max_error`` is the largest absolute residual over the fitting grid,
    so a brute-force rescan of the same grid reproduces it exactly.
    """

    knots_x: np.ndarray
    knots_y: np.ndarray
    max_error: float
    grid: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.knots_x, self.knots_y)


def _hat_matrix(grid, knots_x):
    # segment index in [0, n_knots-2]; the right endpoint folds into the last
    seg = np.clip(np.searchsorted(knots_x, grid, side="right") - 1, 0, knots_x.size - 2)
    t = (grid - knots_x[seg]) / (knots_x[seg + 1] - knots_x[seg])
    a = np.zeros((grid.size, knots_x.size))
    rows = np.arange(grid.size)
    a[rows, seg] = 1.0 - t
    a[rows, seg + 1] = t
    return a


def piecewise_linear_fit(fn, knots, lo=-4.0, hi=4.0, grid_points=801):
    """Least-max-error continuous piecewise-linear fit of a scalar map.

    Knot abscissae are spaced evenly over [lo, hi]; knot ordinates minimize
    the worst absolute error over an evenly spaced evaluation grid of
    ``grid_points`` samples on the same interval (a small Chebyshev linear
    program).  Useful for compressing demapping tables into a few segments.
    """
    knots = int(knots)
    if knots < 2:
        raise ConfigError("need at least 2 knots")
    if not hi > lo:
        raise ConfigError("empty fit interval")
    if int(grid_points) < knots:
        raise ConfigError("grid coarser than knot set")
    grid = np.linspace(lo, hi, int(grid_points))
    f = np.asarray(fn(grid), dtype=float).ravel()
    if f.size != grid.size:
        raise ConfigError("fitted function must map the grid pointwise")
    if not np.all(np.isfinite(f)):
        raise NumericalDegeneracyError("non-finite samples on the fit grid")

    kx = np.linspace(lo, hi, knots)
    a = _hat_matrix(grid, kx)
    # minimize t subject to |A v - f| <= t
    n = knots
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.zeros((2 * grid.size, n + 1))
    a_ub[: grid.size, :n] = a
    a_ub[: grid.size, -1] = -1.0
    a_ub[grid.size :, :n] = -a
    a_ub[grid.size :, -1] = -1.0
    b_ub = np.concatenate([f, -f])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub,
                  bounds=[(None, None)] * n + [(0.0, None)], method="highs")
    if not res.success:
        raise RuntimeError(f"minimax fit did not converge: {res.message}")
    ky = res.x[:n]
    err = float(np.max(np.abs(a @ ky - f)))
    return PiecewiseLinearFit(knots_x=kx, knots_y=ky, max_error=err, grid=grid)
