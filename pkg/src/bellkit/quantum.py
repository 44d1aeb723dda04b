"""Two-qubit pure-state predictions under projective spin measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Behavior, Scenario
from .errors import UsageError

UNIT_TOL = 1e-12

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
_SIGN = (1.0, -1.0)


@dataclass(frozen=True)
class MeasurementDirection:
    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        if abs(norm - 1.0) > UNIT_TOL:
            raise UsageError(f"measurement direction ({self.x}, {self.y}, {self.z}) has norm {norm!r}, not 1")

    @classmethod
    def from_angles(cls, polar_deg: float, azimuth_deg: float = 0.0) -> "MeasurementDirection":
        """Bloch direction from polar and azimuthal angles in degrees.

        With the default azimuth the direction lies in the x-z plane at
        ``polar_deg`` from the z axis. The result is renormalized so the
        unit-norm check holds to machine precision.
        """
        t, f = math.radians(polar_deg), math.radians(azimuth_deg)
        v = np.array([math.sin(t) * math.cos(f), math.sin(t) * math.sin(f), math.cos(t)])
        v /= np.linalg.norm(v)
        return cls(*map(float, v))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """Amplitudes in the basis ``|00>, |01>, |10>, |11>``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amp.shape != (4,):
            raise UsageError(f"a two-qubit state needs 4 amplitudes, got {amp.size}")
        norm = float(np.sum(np.abs(amp) ** 2))
        if abs(norm - 1.0) > UNIT_TOL:
            raise UsageError(f"state has squared norm {norm!r}, not 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)


def singlet_state() -> TwoQubitState:
    r = 1 / math.sqrt(2)
    return TwoQubitState([0, r, -r, 0])


def _check_dirs(dirs) -> list[MeasurementDirection]:
    dirs = list(dirs)
    if not dirs:
        raise UsageError("need at least one measurement direction per side")
    for d in dirs:
        if not isinstance(d, MeasurementDirection):
            raise UsageError(f"expected MeasurementDirection, got {type(d).__name__}")
    return dirs


def singlet_behavior(dirs_a: Sequence[MeasurementDirection], dirs_b: Sequence[MeasurementDirection]) -> Behavior:
    """``p[a][b][x][y] = (1 - s(x) s(y) a.b) / 4``."""
    dirs_a, dirs_b = _check_dirs(dirs_a), _check_dirs(dirs_b)
    p = np.empty((len(dirs_a), len(dirs_b), 2, 2))
    for i, da in enumerate(dirs_a):
        for j, db in enumerate(dirs_b):
            dot = float(da.vector @ db.vector)
            for x in range(2):
                for y in range(2):
                    p[i, j, x, y] = (1 - _SIGN[x] * _SIGN[y] * dot) / 4
    return Behavior(Scenario(len(dirs_a), len(dirs_b), 2, 2), p)


def projector(d: MeasurementDirection, outcome: int) -> np.ndarray:
    """``(I + s(outcome) n.sigma) / 2``."""
    n_sigma = np.tensordot(d.vector, _PAULI, axes=(0, 0))
    return (np.eye(2) + _SIGN[outcome] * n_sigma) / 2


def pure_state_behavior(psi: TwoQubitState, dirs_a, dirs_b) -> Behavior:
    """Born-rule probabilities ``<psi| P_x(a) (x) P_y(b) |psi>``."""
    if not isinstance(psi, TwoQubitState):
        raise UsageError(f"expected TwoQubitState, got {type(psi).__name__}")
    dirs_a, dirs_b = _check_dirs(dirs_a), _check_dirs(dirs_b)
    v = psi.amplitudes
    p = np.empty((len(dirs_a), len(dirs_b), 2, 2))
    for i, da in enumerate(dirs_a):
        pa = [projector(da, x) for x in range(2)]
        for j, db in enumerate(dirs_b):
            pb = [projector(db, y) for y in range(2)]
            for x in range(2):
                for y in range(2):
                    p[i, j, x, y] = float(np.real(np.vdot(v, np.kron(pa[x], pb[y]) @ v)))
    return Behavior(Scenario(len(dirs_a), len(dirs_b), 2, 2), p)


TSIRELSON_ANGLES = ((0.0, 90.0), (45.0, 135.0))


def tsirelson_directions() -> tuple[list[MeasurementDirection], list[MeasurementDirection]]:
    """Alice at 0 and 90 degrees, Bob at 45 and 135 degrees, all in the x-z plane."""
    a, b = TSIRELSON_ANGLES
    return [MeasurementDirection.from_angles(t) for t in a], [MeasurementDirection.from_angles(t) for t in b]


def tsirelson_singlet() -> Behavior:
    return singlet_behavior(*tsirelson_directions())
