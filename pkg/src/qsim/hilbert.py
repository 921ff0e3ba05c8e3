"""Truncated oscillator operators on (optionally excitation-capped) product spaces.

Operators are plain dense ``complex128`` arrays over ``ProductSpace.basis``.
Embedding computes matrix elements directly on the retained basis, which
equals restricting the full tensor-product operator (``project_full``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "ModeSpec",
    "ProductSpace",
    "annihilation_op",
    "number_op",
    "excitation_capped_basis",
    "embed_op",
    "embed_product",
    "project_full",
    "full_tensor_op",
    "basis_state",
]


@dataclass(frozen=True)
class ModeSpec:
    label: str
    dim: int

    def __post_init__(self):
        if int(self.dim) < 2:
            raise ValueError(f"mode {self.label!r}: dim must be >= 2, got {self.dim}")


@dataclass(frozen=True)
class ProductSpace:
    """Ordered modes plus the retained occupation tuples (lexicographic)."""

    modes: tuple[ModeSpec, ...]
    excitation_cap: int | None
    basis: tuple[tuple[int, ...], ...]
    _index: Mapping[tuple[int, ...], int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_index", {occ: i for i, occ in enumerate(self.basis)})

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.dim for m in self.modes)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    def mode_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no mode labelled {label!r} in {self.labels}") from None

    def index(self, occupation: Sequence[int]) -> int:
        return self._index[tuple(occupation)]

    def __contains__(self, occupation) -> bool:
        return tuple(occupation) in self._index

    @property
    def occupations(self) -> np.ndarray:
        """(size, n_modes) integer array of occupations."""
        return np.array(self.basis, dtype=int).reshape(self.size, len(self.modes))

    def full_indices(self) -> np.ndarray:
        """Positions of the retained basis states inside the full tensor basis."""
        return np.ravel_multi_index(self.occupations.T, self.dims)


def excitation_capped_basis(modes: Sequence[ModeSpec], cap: int | None = None) -> ProductSpace:
    modes = tuple(modes)
    labels = [m.label for m in modes]
    if len(set(labels)) != len(labels):
        raise ValueError(f"mode labels must be unique, got {labels}")
    if cap is not None and cap < 0:
        raise ValueError("excitation cap must be >= 0")
    # itertools.product over ranges is already lexicographic
    basis = tuple(
        occ
        for occ in itertools.product(*(range(m.dim) for m in modes))
        if cap is None or sum(occ) <= cap
    )
    return ProductSpace(modes=modes, excitation_cap=cap, basis=basis)


def annihilation_op(dim: int) -> np.ndarray:
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def embed_product(space: ProductSpace, factors: Mapping[int, np.ndarray]) -> np.ndarray:
    """Embed the tensor product of local operators ``{mode_index: op}``.

    Unlisted modes carry the identity. Matrix elements are products of local
    elements, so the result is exactly the capped restriction of the full
    tensor operator (products across modes are formed before truncation).
    """
    occ = space.occupations
    out = np.ones((space.size, space.size), dtype=complex)
    for i, mode in enumerate(space.modes):
        n = occ[:, i]
        if i in factors:
            local = np.asarray(factors[i], dtype=complex)
            if local.shape != (mode.dim, mode.dim):
                raise ValueError(
                    f"local operator shape {local.shape} does not match mode "
                    f"{mode.label!r} of dim {mode.dim}"
                )
            out *= local[n[:, None], n[None, :]]
        else:
            out *= n[:, None] == n[None, :]
    bad = set(factors) - set(range(len(space.modes)))
    if bad:
        raise IndexError(f"mode index out of range: {sorted(bad)}")
    return out


def embed_op(space: ProductSpace, mode_index: int, local: np.ndarray) -> np.ndarray:
    if not 0 <= mode_index < len(space.modes):
        raise IndexError(f"mode index {mode_index} out of range")
    return embed_product(space, {mode_index: local})


def full_tensor_op(dims: Sequence[int], factors: Mapping[int, np.ndarray]) -> np.ndarray:
    """Kronecker-product operator on the uncapped tensor space."""
    out = np.ones((1, 1), dtype=complex)
    for i, d in enumerate(dims):
        out = np.kron(out, factors.get(i, np.eye(d)))
    return out


def project_full(space: ProductSpace, full_op: np.ndarray) -> np.ndarray:
    """Restrict a full tensor-space operator (or an already-restricted one) to ``space``."""
    full_op = np.asarray(full_op)
    if full_op.shape == (space.size, space.size):
        return full_op.copy()
    keep = space.full_indices()
    return full_op[np.ix_(keep, keep)]


def basis_state(space: ProductSpace, occupation: Sequence[int]) -> np.ndarray:
    psi = np.zeros(space.size, dtype=complex)
    psi[space.index(occupation)] = 1.0
    return psi
