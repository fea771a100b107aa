"""Array-backed snapshot containers for CFRs and CIRs.

A series stores its snapshots as one 2-D array (time x subcarrier or
time x delay); indexing or iterating yields the per-snapshot dataclasses.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .config import RadioParams
from .errors import DataError, EmptySeriesError, ShapeError

CALIBRATION_STATES = ("raw", "calibrated", "residual")


@dataclass(frozen=True)
class CfrSnapshot:
    time_s: float
    values: np.ndarray
    rssi_db: float
    subcarrier_indices: np.ndarray

    def __post_init__(self):
        if np.shape(self.values) != np.shape(self.subcarrier_indices):
            raise ShapeError("CFR values and subcarrier indices differ in length")

    def with_values(self, values) -> "CfrSnapshot":
        return replace(self, values=np.asarray(values))


@dataclass
class CfrSeries:
    radio: RadioParams
    times_s: np.ndarray
    values: np.ndarray
    rssi_db: np.ndarray
    subcarrier_indices: np.ndarray = field(default=None)

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=float)
        self.rssi_db = np.asarray(self.rssi_db, dtype=float)
        self.values = np.asarray(self.values)
        if self.subcarrier_indices is None:
            self.subcarrier_indices = self.radio.indices
        self.subcarrier_indices = np.asarray(self.subcarrier_indices, dtype=np.int64)
        n = self.times_s.shape[0]
        if self.values.shape != (n, self.subcarrier_indices.size):
            raise ShapeError(
                f"values shape {self.values.shape} != ({n}, {self.subcarrier_indices.size})"
            )
        if self.rssi_db.shape != (n,):
            raise ShapeError("rssi_db must have one entry per snapshot")
        if n > 1 and np.any(np.diff(self.times_s) <= 0):
            raise DataError("snapshot times must be strictly increasing")

    def __len__(self):
        return self.times_s.shape[0]

    def __getitem__(self, i) -> CfrSnapshot:
        return CfrSnapshot(
            float(self.times_s[i]), self.values[i], float(self.rssi_db[i]), self.subcarrier_indices
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def snapshots(self) -> list[CfrSnapshot]:
        return list(self)

    def subset(self, keep) -> "CfrSeries":
        return CfrSeries(
            self.radio, self.times_s[keep], self.values[keep], self.rssi_db[keep],
            self.subcarrier_indices,
        )

    def with_values(self, values) -> "CfrSeries":
        return CfrSeries(self.radio, self.times_s, values, self.rssi_db, self.subcarrier_indices)

    @classmethod
    def from_snapshots(cls, radio: RadioParams, snapshots) -> "CfrSeries":
        snapshots = list(snapshots)
        if not snapshots:
            raise EmptySeriesError("no snapshots")
        return cls(
            radio,
            [s.time_s for s in snapshots],
            np.stack([s.values for s in snapshots]),
            [s.rssi_db for s in snapshots],
            snapshots[0].subcarrier_indices,
        )


@dataclass(frozen=True)
class Cir:
    time_s: float
    delay_grid_s: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.values) != np.shape(self.delay_grid_s):
            raise ShapeError("CIR values and delay grid differ in length")


@dataclass
class CirSeries:
    """CIRs on a shared delay grid.

    ``delay_grid_s`` is either the full oversampled ring or a window cut
    from it; in both cases bins are spaced by the radio's delay step.
    """

    radio: RadioParams
    times_s: np.ndarray
    delay_grid_s: np.ndarray
    values: np.ndarray
    calibration_state: str = "raw"

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=float)
        self.delay_grid_s = np.asarray(self.delay_grid_s, dtype=float)
        self.values = np.asarray(self.values)
        if self.calibration_state not in CALIBRATION_STATES:
            raise DataError(f"unknown calibration state {self.calibration_state!r}")
        n = self.times_s.shape[0]
        if self.values.shape != (n, self.delay_grid_s.size):
            raise ShapeError(
                f"values shape {self.values.shape} != ({n}, {self.delay_grid_s.size})"
            )
        if n > 1 and np.any(np.diff(self.times_s) <= 0):
            raise DataError("CIR times must be strictly increasing")

    def __len__(self):
        return self.times_s.shape[0]

    def __getitem__(self, i) -> Cir:
        return Cir(float(self.times_s[i]), self.delay_grid_s, self.values[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def cirs(self) -> list[Cir]:
        return list(self)

    def replace(self, **changes) -> "CirSeries":
        return replace(self, **changes)

    def delay_index(self, tau_s: float) -> int:
        """Index of the grid bin nearest ``tau_s``."""
        return int(np.argmin(np.abs(self.delay_grid_s - tau_s)))

    @classmethod
    def from_cirs(cls, radio: RadioParams, cirs, calibration_state="raw") -> "CirSeries":
        cirs = list(cirs)
        if not cirs:
            raise EmptySeriesError("no CIRs")
        grid = cirs[0].delay_grid_s
        for c in cirs[1:]:
            if c.delay_grid_s.shape != grid.shape or not np.array_equal(c.delay_grid_s, grid):
                raise ShapeError("CIRs do not share a delay grid")
        return cls(
            radio, [c.time_s for c in cirs], grid, np.stack([c.values for c in cirs]),
            calibration_state,
        )
