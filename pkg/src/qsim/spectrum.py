"""Dressed spectra, adiabatic labeling and coupling extraction."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .device import (
    ConfigurationError,
    HamiltonianGenerator,
    SystemModel,
    TWO_PI,
    build_two_qubit_system,
    coupling_at,
)

AMBIGUOUS = 1.0 / math.sqrt(2.0)


class LabelingError(RuntimeError):
    pass


class CrossingNotFoundError(RuntimeError):
    pass


class LabelingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DressedSpectrum:
    energies: np.ndarray  # angular, rad/ns
    states: np.ndarray  # columns are eigenvectors
    labels: Mapping[tuple[int, ...], int]
    overlap_quality: float
    basis: tuple[tuple[int, ...], ...]

    @property
    def ambiguous(self) -> bool:
        return self.overlap_quality <= AMBIGUOUS

    def energy(self, occupation: Sequence[int]) -> float:
        """Energy of the dressed state connected to ``occupation``, in ordinary GHz."""
        try:
            return float(self.energies[self.labels[tuple(occupation)]]) / TWO_PI
        except KeyError:
            raise LabelingError(f"state {tuple(occupation)} is not labeled") from None

    def state(self, occupation: Sequence[int]) -> np.ndarray:
        return self.states[:, self.labels[tuple(occupation)]]

    def frame(self, occupations: Sequence[Sequence[int]]) -> np.ndarray:
        """Columns of the dressed states for ``occupations`` (basis change for projections)."""
        return np.stack([self.state(o) for o in occupations], axis=1)


def greedy_labels(overlaps: np.ndarray) -> tuple[np.ndarray, float]:
    """Assign each bare index (row) an eigenindex (column) by descending |overlap|.

    Ties within 1e-9 go to the lower eigenindex. Returns (assignment, worst overlap).
    """
    n_bare, n_eig = overlaps.shape
    flat = overlaps.ravel()
    rows, cols = np.divmod(np.arange(flat.size), n_eig)
    order = np.lexsort((cols, rows, -np.round(flat, 9)))
    assign = np.full(n_bare, -1)
    used = np.zeros(n_eig, dtype=bool)
    worst = 1.0
    left = min(n_bare, n_eig)
    for k in order:
        r, c = rows[k], cols[k]
        if assign[r] >= 0 or used[c]:
            continue
        assign[r] = c
        used[c] = True
        worst = min(worst, flat[k])
        left -= 1
        if left == 0:
            break
    return assign, float(worst)


def diagonalize_matrix(h: np.ndarray, basis: Sequence[tuple[int, ...]], *, warn: bool = True) -> DressedSpectrum:
    w, v = np.linalg.eigh(h)
    assign, worst = greedy_labels(np.abs(v))
    labels = {tuple(occ): int(j) for occ, j in zip(basis, assign)}
    spec = DressedSpectrum(w, v, labels, worst, tuple(tuple(b) for b in basis))
    if warn and spec.ambiguous:
        warnings.warn(
            f"dressed labeling is ambiguous (min overlap {worst:.3f})", LabelingWarning, stacklevel=3
        )
    return spec


def diagonalize_static(gen: HamiltonianGenerator, t: float = 0.0) -> DressedSpectrum:
    """Eigen-decomposition of H at time ``t`` (static generators are time-independent)."""
    return diagonalize_matrix(gen(t), gen.space.basis)


def eigen_residual(h: np.ndarray, spec: DressedSpectrum) -> float:
    r = h @ spec.states - spec.states * spec.energies[None, :]
    return float(np.max(np.linalg.norm(r, axis=0)) / max(np.linalg.norm(h, 2), 1e-300))


# ---------------------------------------------------------------------------
# Two-qubit couplings
# ---------------------------------------------------------------------------

def _static_two_qubit(model: SystemModel, freqs: Mapping[str, float], include_drive: bool, dim, cap):
    m = model.with_freqs(**freqs)
    if not include_drive:
        m = m.with_drive(amp=0.0)
    return build_two_qubit_system(m, dim, cap)


def _pair_branches(h: np.ndarray, idx_a: int, idx_b: int) -> tuple[float, float]:
    """Energies (GHz) of the two eigenstates with the largest weight in span{a, b}."""
    w, v = np.linalg.eigh(h)
    weight = np.abs(v[idx_a]) ** 2 + np.abs(v[idx_b]) ** 2
    top = np.argsort(weight)[-2:]
    e = np.sort(w[top]) / TWO_PI
    return float(e[0]), float(e[1])


def _splitting(model, freqs, a, b, include_drive, dim, cap) -> float:
    gen = _static_two_qubit(model, freqs, include_drive, dim, cap)
    lo, hi = _pair_branches(gen.static_part, gen.space.index(a), gen.space.index(b))
    return hi - lo


def xy_coupling(
    model: SystemModel,
    nu0: float,
    nu1: float | None = None,
    nu_c: float | None = None,
    *,
    include_drive: bool = False,
    dim: int = 5,
    cap: int | None = 5,
) -> float:
    """Half the splitting of the single-excitation qubit doublet (GHz).

    Branches are picked by weight in span{|100>, |001>}, so no labels are
    needed at resonance. Off resonance this is the local splitting; use
    :func:`pairwise_coupling_strength` for the minimal gap along a scan.
    """
    if model.kind != "two_qubit_coupler":
        raise ConfigurationError("xy_coupling needs a two_qubit_coupler model")
    freqs = {"q0": nu0, "q1": nu0 if nu1 is None else nu1}
    if nu_c is not None:
        freqs["c"] = nu_c
    return 0.5 * _splitting(model, freqs, (1, 0, 0), (0, 0, 1), include_drive, dim, cap)


def zz_coupling(
    model: SystemModel,
    freqs: Mapping[str, float] | None = None,
    *,
    include_drive: bool = False,
    dim: int = 5,
    cap: int | None = 5,
) -> float:
    """zeta = (E11 - E10) - (E01 - E00) from labeled dressed energies (GHz)."""
    gen = _static_two_qubit(model, freqs or {}, include_drive, dim, cap)
    spec = diagonalize_matrix(gen.static_part, gen.space.basis)
    e = {k: spec.energy(k) for k in ((0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 0, 1))}
    return (e[(1, 0, 1)] - e[(1, 0, 0)]) - (e[(0, 0, 1)] - e[(0, 0, 0)])


def pairwise_coupling_strength(
    model: SystemModel,
    state_a: Sequence[int],
    state_b: Sequence[int],
    scan_param: str,
    scan_range: tuple[float, float],
    *,
    fixed: Mapping[str, float] | None = None,
    n_coarse: int = 41,
    include_drive: bool = False,
    dim: int = 5,
    cap: int | None = 5,
    tol: float = 1e-9,
) -> float:
    """Half the minimal splitting between the branches of ``state_a`` and ``state_b`` (GHz).

    The gap is minimized over ``scan_param`` (a mode label) in ``scan_range``:
    coarse grid, then bounded Brent refinement around the best grid point. A
    minimum sitting on the scan boundary means no avoided crossing was found.
    """
    fixed = dict(fixed or {})
    a, b = tuple(state_a), tuple(state_b)

    def gap(x):
        return _splitting(model, dict(fixed, **{scan_param: x}), a, b, include_drive, dim, cap)

    xs = np.linspace(*scan_range, n_coarse)
    gaps = np.array([gap(x) for x in xs])
    k = int(np.argmin(gaps))
    if k in (0, n_coarse - 1):
        raise CrossingNotFoundError(
            f"no avoided crossing between {a} and {b} for {scan_param} in {scan_range}"
        )
    res = minimize_scalar(gap, bounds=(xs[k - 1], xs[k + 1]), method="bounded", options={"xatol": tol})
    return 0.5 * float(min(res.fun, gaps[k]))


def crossing_location(
    model: SystemModel, state_a, state_b, scan_param: str, scan_range, **kwargs
) -> float:
    """Scan-parameter value where the two branches come closest."""
    fixed = dict(kwargs.pop("fixed", None) or {})
    include_drive = kwargs.get("include_drive", False)
    dim, cap = kwargs.get("dim", 5), kwargs.get("cap", 5)

    def gap(x):
        return _splitting(model, dict(fixed, **{scan_param: x}), tuple(state_a), tuple(state_b),
                          include_drive, dim, cap)

    xs = np.linspace(*scan_range, kwargs.get("n_coarse", 41))
    k = int(np.argmin([gap(x) for x in xs]))
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
    return float(minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9}).x)


def effective_exchange(model: SystemModel, nu0: float, nu1: float, nu_c: float) -> float:
    """Dispersive estimate of the qubit-qubit exchange through the coupler (GHz).

    g01 + (g0c g1c / 2) * sum over qubits of [1/(nu_i - nu_c) - 1/(nu_i + nu_c)].
    """
    f = {"q0": nu0, "q1": nu1, "c": nu_c}
    g = {pair: coupling_at(spec, f[pair[0]], f[pair[1]]) for pair, spec in model.couplings.items()}
    g01 = g.get(("q0", "q1"), 0.0)
    g0c = g.get(("q0", "c"), 0.0)
    g1c = g.get(("q1", "c"), 0.0)
    s = 0.0
    for nu in (nu0, nu1):
        s += 1.0 / (nu - nu_c) - 1.0 / (nu + nu_c)
    return g01 + 0.5 * g0c * g1c * s


# ---------------------------------------------------------------------------
# Maps
# ---------------------------------------------------------------------------

def _axis_freqs(name: str, value: float) -> dict[str, float]:
    if name == "qubits":
        return {"q0": value, "q1": value}
    return {name: value}


def sweep_map(
    model: SystemModel,
    axis1: tuple[str, Sequence[float]],
    axis2: tuple[str, Sequence[float]],
    quantity: str = "zz",
    **kwargs,
) -> np.ndarray:
    """Grid of ``quantity`` with grid[i, j] at (axis1[i], axis2[j]).

    Axes are (mode label or "qubits", values). Points that fail are NaN.
    """
    name1, v1 = axis1[0], np.sort(np.asarray(axis1[1], dtype=float))
    name2, v2 = axis2[0], np.sort(np.asarray(axis2[1], dtype=float))
    if quantity not in ("xy", "zz"):
        raise ValueError(f"unknown quantity {quantity!r}")
    grid = np.full((v1.size, v2.size), np.nan)
    for i, x in enumerate(v1):
        for j, y in enumerate(v2):
            freqs = dict(model.freqs())
            freqs.update(_axis_freqs(name1, x))
            freqs.update(_axis_freqs(name2, y))
            try:
                if quantity == "zz":
                    grid[i, j] = zz_coupling(model, freqs, **kwargs)
                else:
                    grid[i, j] = xy_coupling(model, freqs["q0"], freqs["q1"], freqs["c"], **kwargs)
            except (LabelingError, np.linalg.LinAlgError):
                pass
    return grid


def export_map_csv(axis1, axis2, grid: np.ndarray, path: str | Path, names=("axis1_GHz", "axis2_GHz")) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([names[0], names[1], "value_GHz"])
        for i, x in enumerate(np.sort(np.asarray(axis1, float))):
            for j, y in enumerate(np.sort(np.asarray(axis2, float))):
                w.writerow([f"{x:.9f}", f"{y:.9f}", f"{grid[i, j]:.12e}"])
    return path


def scan_levels(
    make_matrix: Callable[[float], np.ndarray], values: Sequence[float], n_levels: int | None = None
) -> np.ndarray:
    """Sorted eigenvalues (GHz) of ``make_matrix(x)`` for each x; rows follow ``values``."""
    rows = []
    for x in values:
        w = np.linalg.eigvalsh(make_matrix(float(x))) / TWO_PI
        rows.append(w[:n_levels] if n_levels else w)
    return np.array(rows)


def min_gap(
    make_matrix: Callable[[float], np.ndarray], bounds: tuple[float, float], lower: int, n_coarse: int = 201
) -> tuple[float, float]:
    """(location, gap in GHz) of the closest approach between sorted levels ``lower`` and ``lower+1``."""
    def gap(x):
        w = np.linalg.eigvalsh(make_matrix(float(x))) / TWO_PI
        return w[lower + 1] - w[lower]

    xs = np.linspace(*bounds, n_coarse)
    g = np.array([gap(x) for x in xs])
    k = int(np.argmin(g))
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, n_coarse - 1)]
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(res.fun)


COUPLING_PAIRS = {
    "J_100_001": ((1, 0, 0), (0, 0, 1), (5.9, 6.1)),
    "J_101_200": ((1, 0, 1), (2, 0, 0), (5.6, 5.9)),
}


def coupling_vs_coupler(
    model: SystemModel, coupler_freqs: Sequence[float], pair: str = "J_101_200", *,
    scan_range: tuple[float, float] | None = None, dim: int = 5, cap: int | None = 5,
) -> np.ndarray:
    """Resonant coupling (GHz) of a named level pair found by scanning Q1 at each coupler frequency."""
    a, b, default_range = COUPLING_PAIRS[pair]
    rng = scan_range or default_range
    return np.array([
        pairwise_coupling_strength(model, a, b, "q1", rng, fixed={"c": float(nc)}, n_coarse=21, dim=dim, cap=cap)
        for nc in coupler_freqs
    ])
