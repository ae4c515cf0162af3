"""Sampling primitives for the solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractError
from .rng import RandomStream


@dataclass(frozen=True)
class ColoredNoiseSpec:
    beta: float
    horizon: int
    dims: int

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ContractError("beta must be finite and non-negative")
        if self.horizon < 1:
            raise ContractError("colored noise needs a horizon of at least 1")
        if self.dims < 1:
            raise ContractError("colored noise needs at least one dimension")


def sample_gaussian(rng: RandomStream, n: int, H: int, d: int) -> np.ndarray:
    """``n`` i.i.d. standard-normal matrices, shape ``(n, H, d)``."""
    if n < 1:
        raise ContractError("need at least one sample")
    return rng.normal((n, H, d))


def powerlaw_scales(beta: float, H: int) -> np.ndarray:
    """Amplitude per real-DFT frequency bin, ``f ** (-beta / 2)``.

    The zero-frequency bin borrows the scale of the lowest nonzero bin.
    """
    f = np.fft.rfftfreq(H)
    scales = np.ones_like(f)
    if H > 1:
        scales[1:] = f[1:] ** (-beta / 2.0)
        scales[0] = scales[1]
    return scales


def sample_colored(rng: RandomStream, spec: ColoredNoiseSpec, n: int) -> np.ndarray:
    """Gaussian noise with power spectral density ``~ f ** (-beta)`` along time.

    Returns shape ``(n, H, d)``. Each (sample, dim) series is rescaled to
    unit empirical variance. ``beta == 0`` draws white noise directly in the
    time domain.
    """
    if n < 1:
        raise ContractError("need at least one sample")
    H, d = spec.horizon, spec.dims
    if spec.beta == 0 or H == 1:
        x = rng.normal((n, d, H))
    else:
        scales = powerlaw_scales(spec.beta, H)
        nf = scales.shape[0]
        re = rng.normal((n, d, nf))
        im = rng.normal((n, d, nf))
        coeffs = scales * (re + 1j * im)
        # the DC bin (and Nyquist for even H) of a real signal has no phase
        coeffs[..., 0] = coeffs[..., 0].real
        if H % 2 == 0:
            coeffs[..., -1] = coeffs[..., -1].real
        x = np.fft.irfft(coeffs, n=H, axis=-1)
    std = x.std(axis=-1, keepdims=True)
    std[std == 0] = 1.0
    x = x / std
    return np.ascontiguousarray(np.swapaxes(x, 1, 2))


def gumbel_max_sample(rng: RandomStream, probs, n: int) -> np.ndarray:
    """Draw ``n`` indices from the categorical given by (unnormalised) ``probs``.

    ``probs`` may also be a stack of distributions, shape ``(..., K)``; then
    the result has shape ``(n, ...)``.
    """
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ContractError("probabilities must be finite and non-negative")
    total = p.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise ContractError("probabilities must not all be zero")
    with np.errstate(divide="ignore"):
        logp = np.log(p / total)
    g = rng.gumbel((n,) + p.shape)
    return np.argmax(logp + g, axis=-1)
