"""Hermitian Hamiltonians, optionally piecewise-constant in time (gate pulses).

All energies are in units where hbar = 1 and the characteristic coupling is
O(1). Entries with magnitude below ZERO_THRESHOLD are structural zeros; a
baseline_floor > 0 lifts every structurally-active entry to at least that
magnitude in every slice, so ratios H(t)/H(t') along an active edge are
always finite.
"""

from __future__ import annotations

import numpy as np

HERMITICITY_TOL = 1e-12
ZERO_THRESHOLD = 1e-12


class HamiltonianError(ValueError):
    pass


def _check_hermitian(mat: np.ndarray, slice_index: int) -> None:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise HamiltonianError(f"slice {slice_index}: matrix is not square ({mat.shape})")
    delta = np.abs(mat - mat.conj().T)
    worst = np.unravel_index(np.argmax(delta), delta.shape)
    if delta[worst] > HERMITICITY_TOL:
        n, m = worst
        raise HamiltonianError(
            f"slice {slice_index}: not Hermitian, H[{n},{m}]={mat[n, m]!r} vs "
            f"conj(H[{m},{n}])={np.conj(mat[m, n])!r} (|diff|={delta[worst]:.3e})"
        )


def _apply_floor(mat: np.ndarray, active: np.ndarray, floor: float) -> np.ndarray:
    """Lift active entries of a Hermitian matrix to magnitude >= floor."""
    out = mat.copy()
    dim = mat.shape[0]
    for n in range(dim):
        if active[n, n]:
            d = out[n, n].real
            if abs(d) < floor:
                out[n, n] = floor if d >= 0 else -floor
        for m in range(n + 1, dim):
            if not active[n, m]:
                continue
            v = out[n, m]
            a = abs(v)
            if a < floor:
                v = floor * (v / a) if a > 0 else complex(floor)
                out[n, m] = v
                out[m, n] = np.conj(v)
    return out


class HamiltonianModel:
    """A Hermitian matrix, or an ordered list of them for pulsed schedules.

    Slice s is valid on [start_times[s], start_times[s+1]); the last slice
    extends to +inf. start_times[0] must be 0.
    """

    def __init__(self, matrices, start_times=None, baseline_floor: float = 0.0):
        if isinstance(matrices, np.ndarray) and matrices.ndim == 2:
            matrices = [matrices]
        mats = [np.asarray(m, dtype=np.complex128) for m in matrices]
        if not mats:
            raise HamiltonianError("at least one slice required")
        dim = mats[0].shape[0]
        for i, m in enumerate(mats):
            _check_hermitian(m, i)
            if m.shape[0] != dim:
                raise HamiltonianError(f"slice {i}: dimension {m.shape[0]} != {dim}")
        if start_times is None:
            start_times = [0.0] * 1 if len(mats) == 1 else None
            if start_times is None:
                raise HamiltonianError("start_times required for multiple slices")
        starts = np.asarray(start_times, dtype=np.float64)
        if len(starts) != len(mats):
            raise HamiltonianError("start_times length must match number of slices")
        if starts[0] != 0.0:
            raise HamiltonianError("first slice must start at t=0")
        if np.any(np.diff(starts) <= 0):
            raise HamiltonianError("slice start times must be strictly increasing")
        if baseline_floor < 0:
            raise HamiltonianError("baseline_floor must be >= 0")

        active = np.zeros((dim, dim), dtype=bool)
        for m in mats:
            active |= np.abs(m) > ZERO_THRESHOLD
        if baseline_floor > 0.0:
            mats = [_apply_floor(m, active, baseline_floor) for m in mats]
            for m in mats:
                active |= np.abs(m) > ZERO_THRESHOLD

        self._mats = [m.copy() for m in mats]
        for m in self._mats:
            m.flags.writeable = False
        self._starts = starts
        self._starts.flags.writeable = False
        self._active = active
        self._active.flags.writeable = False
        self.baseline_floor = float(baseline_floor)
        self._eig_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._directed_cache: dict[int, np.ndarray] = {}

    @classmethod
    def constant(cls, matrix, baseline_floor: float = 0.0) -> "HamiltonianModel":
        return cls([matrix], [0.0], baseline_floor=baseline_floor)

    @classmethod
    def piecewise(cls, start_times, matrices, baseline_floor: float = 0.0) -> "HamiltonianModel":
        return cls(matrices, start_times, baseline_floor=baseline_floor)

    @property
    def dimension(self) -> int:
        return self._mats[0].shape[0]

    @property
    def n_slices(self) -> int:
        return len(self._mats)

    @property
    def start_times(self) -> np.ndarray:
        return self._starts

    @property
    def is_time_dependent(self) -> bool:
        return len(self._mats) > 1

    def slice_index(self, t: float) -> int:
        if t < 0:
            raise HamiltonianError(f"time {t} < 0")
        return int(np.searchsorted(self._starts, t, side="right") - 1)

    def slice_matrix(self, s: int) -> np.ndarray:
        return self._mats[s]

    def matrix_at(self, t: float) -> np.ndarray:
        return self._mats[self.slice_index(t)]

    def union_pattern(self) -> np.ndarray:
        """Boolean matrix: entry active (nonzero) in at least one slice."""
        return self._active

    def eig(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """Cached eigendecomposition (evals, evecs) of slice s."""
        if s not in self._eig_cache:
            evals, evecs = np.linalg.eigh(self._mats[s])
            self._eig_cache[s] = (evals, evecs)
        return self._eig_cache[s]

    def directed_values(self, graph) -> np.ndarray:
        """Directed-edge entries per slice: complex array [n_slices, n_directed]."""
        key = id(graph)
        if key not in self._directed_cache:
            out = np.empty((self.n_slices, graph.n_directed), dtype=np.complex128)
            frm = graph.directed_from
            to = graph.directed_to
            for s, m in enumerate(self._mats):
                out[s, :] = m[frm, to]
            out.flags.writeable = False
            self._directed_cache[key] = out
        return self._directed_cache[key]
