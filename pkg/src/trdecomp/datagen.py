"""Seeded synthetic tensor generators.

Two families: cores with i.i.d. standard normal entries (well conditioned),
and cores whose unfoldings share a fixed right factor and have geometrically
decaying singular values so each unfolding has a prescribed condition number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import fold_core, tr_reconstruct

GENERATOR_KINDS = ("gaussian", "ill_conditioned")


@dataclass(frozen=True)
class SynthSpec:
    """Cubical synthetic instance: `order` cores of shape (rank, dim, rank)."""

    order: int
    dim: int
    rank: int
    kind: str = "gaussian"
    kappa: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("tensor order must be >= 2")
        if self.dim < 1 or self.rank < 1:
            raise ValueError("dim and rank must be positive")
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind == "ill_conditioned":
            if self.kappa < 1:
                raise ValueError("condition number must be >= 1")
            if self.dim < self.rank**2:
                raise ValueError(
                    f"ill-conditioned cores need dim >= rank^2 "
                    f"({self.dim} < {self.rank**2})"
                )
            if self.rank == 1 and self.kappa != 1:
                raise ValueError("rank 1 admits only condition number 1")


def _rng(spec: SynthSpec) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))


def _orthonormal_columns(rng, rows, cols):
    # QR of a Gaussian matrix; fixing the R diagonal signs makes it unique.
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def gaussian_cores(spec: SynthSpec) -> list[np.ndarray]:
    """Cores with i.i.d. standard normal entries."""
    if spec.kind != "gaussian":
        raise ValueError("spec.kind must be 'gaussian'")
    rng = _rng(spec)
    return [
        rng.standard_normal((spec.rank, spec.dim, spec.rank))
        for _ in range(spec.order)
    ]


def ill_conditioned_cores(spec: SynthSpec) -> list[np.ndarray]:
    """Cores whose unfoldings are U_n S V^T with fresh orthonormal U_n per
    core, a single orthogonal V shared by all cores, and singular values
    decaying geometrically from 1 to 1/kappa."""
    if spec.kind != "ill_conditioned":
        raise ValueError("spec.kind must be 'ill_conditioned'")
    rng = _rng(spec)
    r2 = spec.rank**2
    v = _orthonormal_columns(rng, r2, r2)
    if r2 > 1:
        s = spec.kappa ** (-np.arange(r2) / (r2 - 1))
    else:
        s = np.ones(1)
    cores = []
    for _ in range(spec.order):
        u = _orthonormal_columns(rng, spec.dim, r2)
        unfolding = (u * s) @ v.T
        cores.append(fold_core(unfolding, spec.rank, spec.rank))
    return cores


def synth_cores(spec: SynthSpec) -> list[np.ndarray]:
    if spec.kind == "gaussian":
        return gaussian_cores(spec)
    return ill_conditioned_cores(spec)


def synth_tensor(spec: SynthSpec, max_entries: int = 100_000_000):
    """Ground-truth cores and the dense tensor they represent."""
    if spec.dim**spec.order > max_entries:
        raise ValueError(
            f"synthetic tensor would hold {spec.dim**spec.order} entries "
            f"(cap {max_entries})"
        )
    cores = synth_cores(spec)
    return tr_reconstruct(cores), cores


__all__ = [
    "GENERATOR_KINDS",
    "SynthSpec",
    "gaussian_cores",
    "ill_conditioned_cores",
    "synth_cores",
    "synth_tensor",
]
