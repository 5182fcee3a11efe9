"""Achievable-rate estimation from soft demapper output.

The figure of merit is the generalized mutual information of the bit
metric decoder, in bits per symbol:

    G = sum_i ( 1 - E[ log2(1 + exp(-(-1)^{b_i} L_i)) ] )

alongside a 95% confidence halfwidth from the per-symbol loss variance.
This module also hosts the common-random-number link evaluator used by
the sweep and bisection drivers, and the scalar LLR rescaling that a
mismatched (relay-blind) demapper needs to stop its rate estimate from
collapsing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    AwgnSegment,
    DmcMatrix,
    RelayFunction,
    derived_rng,
    nearest_index,
    power_normalizing_eta,
    scale_relay_equivalent_snr,
    transition_matrix,
    transmit,
)
from .constellation import Constellation, indices_for_bits
from .demapper import Demapper
from .errors import ConfigError

_LN2 = np.log(2.0)
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0

HD_MATCHED = "hd_matched"
HD_LEGACY_SOPT = "hd_legacy_sopt"
SCALE_RELAY = "scale"
VARIANTS = (HD_MATCHED, HD_LEGACY_SOPT, SCALE_RELAY)


@dataclass(frozen=True)
class GmiEstimate:
    """Sample estimate of the bit-metric rate.

    value is clamped at zero; ci95 is the plain normal-approximation
    halfwidth of the unclamped mean over symbols.
    """

    value: float
    ci95: float
    per_level: np.ndarray
    n_symbols: int


@dataclass(frozen=True)
class ScaleResult:
    scale: float
    loss: float                  # bits/symbol at the optimum
    degenerate: bool = False


def _bit_losses(llrs: np.ndarray, bits: np.ndarray, scale: float = 1.0) -> np.ndarray:
    z = (1.0 - 2.0 * np.asarray(bits, dtype=np.float64)) * np.asarray(llrs)
    return np.logaddexp(0.0, -scale * z) / _LN2


def gmi_from_llrs(llrs: np.ndarray, bits: np.ndarray) -> GmiEstimate:
    """Estimate the rate from paired (llrs, sent bits), both (n, m)."""
    llrs = np.atleast_2d(llrs)
    bits = np.atleast_2d(bits)
    if llrs.shape != bits.shape:
        raise ConfigError("llrs and bits shapes differ")
    n, m = llrs.shape
    loss = _bit_losses(llrs, bits)
    per_symbol = loss.sum(axis=1)
    value = m - float(per_symbol.mean())
    ci = 1.96 * float(per_symbol.std(ddof=1)) / np.sqrt(n) if n > 1 else np.inf
    return GmiEstimate(
        value=max(value, 0.0),
        ci95=ci,
        per_level=1.0 - loss.mean(axis=0),
        n_symbols=n,
    )


def optimal_llr_scale(llrs: np.ndarray, bits: np.ndarray, tol: float = 1e-6) -> ScaleResult:
    """Scalar multiplier minimizing the decoding loss of the given LLRs.

    The loss is convex in the multiplier, so a golden-section search over
    an adaptively grown bracket finds the optimum.  Metrics carrying no
    information at all (identically zero) report scale 0 and a degenerate
    flag instead of an arbitrary bracket endpoint.
    """
    llrs = np.atleast_2d(llrs)
    bits = np.atleast_2d(bits)
    m = llrs.shape[1]
    z = (1.0 - 2.0 * bits.astype(np.float64)) * llrs

    def f(zeta):
        return float(np.logaddexp(0.0, -zeta * z).mean()) * m / _LN2

    if not np.any(z):
        return ScaleResult(scale=0.0, loss=f(0.0), degenerate=True)

    hi = 8.0
    while f(hi) < f(_INVPHI * hi):
        hi *= 2.0
        if hi > 2.0 ** 40:
            return ScaleResult(scale=0.0, loss=f(0.0), degenerate=True)
    a, b = 0.0, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    s = (a + b) / 2.0
    return ScaleResult(scale=s, loss=f(s), degenerate=False)


def gmi_with_optimal_scale(llrs: np.ndarray, bits: np.ndarray):
    """Rate after per-batch scalar rescaling; returns (estimate, scaling)."""
    res = optimal_llr_scale(llrs, bits)
    est = gmi_from_llrs(res.scale * np.atleast_2d(llrs), bits)
    return est, res


class RelayGmiEvaluator:
    """Fixed-noise evaluator of link rates as the second hop snr varies.

    Source bits, first-hop noise, and unit-variance second-hop noise are
    drawn once; each query rescales the stored noise.  Rate estimates are
    then continuous and monotone in snr2, which keeps bisection results
    deterministic.  A separate stream with its own noise supports the
    single-hop (relay-injected traffic) rate at the same snr2.
    """

    def __init__(
        self,
        c: Constellation,
        snr1: float,
        variant: str,
        n_symbols: int,
        seed: int,
        dmc: DmcMatrix | None = None,
        dmc_method: str = "analytic",
        dmc_samples: int = 200_000,
    ):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown link variant {variant!r}")
        if n_symbols < 2:
            raise ConfigError("need at least two symbols")
        self.c = c
        self.snr1 = float(snr1)
        self.variant = variant
        self.n_symbols = int(n_symbols)
        m = c.bits_per_symbol

        bits = derived_rng(seed, 0).integers(0, 2, size=self.n_symbols * m, dtype=np.uint8)
        self.bits = bits.reshape(self.n_symbols, m)
        x = c.symbols[indices_for_bits(c, bits)]
        y1 = transmit(x, AwgnSegment(snr=self.snr1), derived_rng(seed, 1))
        self._unit_noise2 = _unit_noise(derived_rng(seed, 2), self.n_symbols)

        if variant == SCALE_RELAY:
            self._relay_out = power_normalizing_eta(self.snr1) * y1
            self.dmc = None
        else:
            self._relay_out = c.symbols[nearest_index(y1, c.symbols)]
            if variant == HD_MATCHED:
                if dmc is None:
                    dmc = transition_matrix(
                        c,
                        self.snr1,
                        RelayFunction.hard_decision(),
                        method=dmc_method,
                        mc_samples=dmc_samples,
                        seed=int(derived_rng(seed, 3).integers(0, 2 ** 31)),
                    )
                self.dmc = dmc
            else:
                self.dmc = None

        bits_s = derived_rng(seed, 4).integers(0, 2, size=self.n_symbols * m, dtype=np.uint8)
        self._bits_single = bits_s.reshape(self.n_symbols, m)
        self._x_single = c.symbols[indices_for_bits(c, bits_s)]
        self._unit_noise_single = _unit_noise(derived_rng(seed, 5), self.n_symbols)

    def _receive(self, snr2: float) -> np.ndarray:
        return self._relay_out + np.sqrt(1.0 / snr2) * self._unit_noise2

    def two_hop_gmi(self, snr2: float) -> GmiEstimate:
        """Rate of traffic that crosses both hops, under this variant."""
        y2 = self._receive(snr2)
        if self.variant == SCALE_RELAY:
            eta = power_normalizing_eta(self.snr1)
            dem = Demapper.conventional(self.c, scale_relay_equivalent_snr(self.snr1, snr2))
            return gmi_from_llrs(dem.llrs(y2 / eta), self.bits)
        if self.variant == HD_MATCHED:
            dem = Demapper.equivalent(self.c, snr2, self.dmc)
            return gmi_from_llrs(dem.llrs(y2), self.bits)
        dem = Demapper.conventional(self.c, snr2)
        est, _ = gmi_with_optimal_scale(dem.llrs(y2), self.bits)
        return est

    def single_hop_gmi(self, snr2: float) -> GmiEstimate:
        """Rate of traffic injected at the relay, seeing only hop 2."""
        y = self._x_single + np.sqrt(1.0 / snr2) * self._unit_noise_single
        dem = Demapper.conventional(self.c, snr2)
        return gmi_from_llrs(dem.llrs(y), self._bits_single)

    def mixture_margin(self, snr2: float, relay_fraction: float, rate: float) -> float:
        """Decodability margin of a codeword whose info positions are
        split between relay-injected and source traffic.

        A fraction relay_fraction of the info bits rides only hop 2; the
        rest of the codeword (source info and all parity) crosses both
        hops.  Positive margin means the mixed word is inside the rate
        region."""
        if not 0.0 <= relay_fraction <= 1.0:
            raise ConfigError("relay fraction must lie in [0, 1]")
        if not 0.0 < rate <= 1.0:
            raise ConfigError("code rate must lie in (0, 1]")
        m = self.c.bits_per_symbol
        g2 = self.two_hop_gmi(snr2).value
        share = relay_fraction * rate
        if share == 0.0:
            return g2 - m * rate
        g1 = self.single_hop_gmi(snr2).value
        return share * g1 + (1.0 - share) * g2 - m * rate


def _unit_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((2, n))
    return (z[0] + 1j * z[1]) / np.sqrt(2.0)


def single_hop_gmi(c: Constellation, snr: float, n_symbols: int, seed: int) -> GmiEstimate:
    """One-shot rate estimate of a plain AWGN link at linear snr."""
    m = c.bits_per_symbol
    bits = derived_rng(seed, 0).integers(0, 2, size=int(n_symbols) * m, dtype=np.uint8)
    x = c.symbols[indices_for_bits(c, bits)]
    y = transmit(x, AwgnSegment(snr=snr), derived_rng(seed, 1))
    dem = Demapper.conventional(c, snr)
    return gmi_from_llrs(dem.llrs(y), bits.reshape(-1, m))


def required_snr2_db(
    margin_fn,
    lo_db: float = -2.0,
    hi_db: float = 30.0,
    tol_db: float = 0.05,
) -> float:
    """Smallest second-hop snr (dB) with nonnegative margin.

    margin_fn maps snr2 in dB to a margin that is monotone nondecreasing
    in snr2.  Returns lo_db when already satisfied there, inf when not
    satisfiable at hi_db, otherwise the high side of a bisection bracket
    no wider than tol_db.
    """
    if margin_fn(hi_db) < 0.0:
        return np.inf
    if margin_fn(lo_db) >= 0.0:
        return lo_db
    lo, hi = lo_db, hi_db
    while hi - lo > tol_db:
        mid = (lo + hi) / 2.0
        if margin_fn(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi
