"""Run orchestration shared by the CLI and the steering service.

A SimulationRun owns a network, its lattice state and the current parameter
set, advances whole cycles, keeps the macrodynamic series, audits
conservation every cycle and applies queued parameter changes only at cycle
boundaries.  Frames, contours and persistence snapshots are all taken at
the post-collision instant of the last completed cycle, which keeps every
exported artifact consistent with the series measurements.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import __version__
from .analysis import MacroRecord, MacroSeries
from .io import (
    IsolineSet,
    RunConfig,
    StateSnapshot,
    apply_param_update,
    extract_isolines,
    serialize_config,
)
from .network import FieldSnapshot, init_singularity, step

AUDIT_TOLERANCE = 1e-9
STASIS_TOLERANCE = 1e-9
STASIS_WINDOW = 20
SNAPSHOT_FORMAT_VERSION = 1


class AuditError(RuntimeError):
    """Conservation audit breach: relative drift above tolerance."""

    def __init__(self, cycle: int, drift: float):
        self.cycle = cycle
        self.drift = drift
        super().__init__(
            f"conservation audit failed at cycle {cycle}: relative drift {drift:.3e} "
            f"exceeds {AUDIT_TOLERANCE:.0e}"
        )


def config_digest(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("ascii")).hexdigest()


class SimulationRun:
    """A deterministic run of one configuration.

    ``cycle`` counts completed cycles; cycle 0 is the initial state.  Queued
    parameter changes take effect for the collision of their target cycle,
    never mid-cycle.
    """

    def __init__(self, config: RunConfig, workers: int = 1):
        config.params.check_theta_against_total(config.omega)
        self.config = config
        self.workers = workers
        self.network = config.build_network()
        self.state = init_singularity(self.network, config.omega, config.seed)
        self.params = config.params
        self.omega = config.omega
        self.cycle = 0
        self.series = MacroSeries()
        self.max_drift = 0.0
        self.contour_level = config.omega / self.network.n_nodes
        self.stasis_cycle: int | None = None
        self.last_field = self.state.field_values()
        self._pending: list[tuple[int, dict]] = [
            (c.at_cycle, dict(c.updates)) for c in config.param_changes
        ]
        self._pending.sort(key=lambda pair: pair[0])
        self._quiet_streak = 0
        degrees = self.network.degrees
        self._border_nodes = (
            np.flatnonzero(degrees < self.network.degree_class)
            if config.topology.boundary == "bordered" else np.empty(0, dtype=np.int64)
        )

    # -- steering ----------------------------------------------------------

    def queue_param_change(self, updates: dict, at_cycle: int | None = None) -> int:
        """Queue a boundary-applied partial parameter change; returns the
        cycle whose collision will first use it."""
        target = self.cycle + 1 if at_cycle is None else at_cycle
        if target <= self.cycle:
            raise ValueError(f"cycle {target} already completed")
        # validate against the params the change will land on
        preview = self.params
        for when, updates_before in self._pending:
            if when <= target:
                preview = apply_param_update(preview, updates_before, self.omega)
        apply_param_update(preview, updates, self.omega)
        self._pending.append((target, dict(updates)))
        self._pending.sort(key=lambda pair: pair[0])
        return target

    def _apply_due_changes(self, target_cycle: int) -> None:
        while self._pending and self._pending[0][0] <= target_cycle:
            _, updates = self._pending.pop(0)
            self.params = apply_param_update(self.params, updates, self.omega)

    # -- stepping ----------------------------------------------------------

    def advance(self, cycles: int, on_cycle=None) -> int:
        """Run up to ``cycles`` full cycles; stops early at stasis when the
        schedule says so.  Returns the number of cycles executed."""
        executed = 0
        for _ in range(cycles):
            if self.config.schedule.stop_on_stasis and self.stasis_cycle is not None:
                break
            self._run_one_cycle()
            executed += 1
            if on_cycle is not None:
                on_cycle(self)
        return executed

    def run_schedule(self, on_cycle=None) -> int:
        return self.advance(self.config.schedule.max_cycles - self.cycle, on_cycle)

    def _run_one_cycle(self) -> None:
        target = self.cycle + 1
        self._apply_due_changes(target)
        stats = step(self.state, self.params, self.workers)
        ke = stats.output_total / self.omega
        kt = stats.turnover_abs / (2.0 * self.omega)
        drift = abs(stats.measured_total - self.omega) / self.omega
        self.cycle = target
        self.last_field = stats.field
        self.series.append(MacroRecord(target, ke, kt, drift))
        if drift > self.max_drift:
            self.max_drift = drift
        if drift > AUDIT_TOLERANCE:
            raise AuditError(target, drift)
        if self._border_nodes.size and "border_hit" not in self.series.marks:
            if np.any(stats.field[self._border_nodes] > 0.0):
                self.series.mark("border_hit", target)
        if ke <= STASIS_TOLERANCE and kt <= STASIS_TOLERANCE:
            self._quiet_streak += 1
            if self._quiet_streak >= STASIS_WINDOW and self.stasis_cycle is None:
                self.stasis_cycle = target - STASIS_WINDOW + 1
                self.series.mark("stasis", self.stasis_cycle)
        else:
            self._quiet_streak = 0

    # -- exports -----------------------------------------------------------

    def field_snapshot(self) -> FieldSnapshot:
        values = (self.state.storage.copy()
                  if self.config.render.quantity == "storage" else self.last_field)
        return FieldSnapshot(network=self.network, cycle=self.cycle, values=values)

    def contours(self, level: float | None = None) -> IsolineSet:
        return extract_isolines(self.field_snapshot(),
                                self.contour_level if level is None else level)

    def snapshot(self) -> StateSnapshot:
        """Persistence snapshot of the post-collision instant of the last
        completed cycle.  Propagation is an involution of the exchange
        buffers, so the pre-propagation outputs are recovered by gathering
        the current inputs back."""
        outputs = self.state.inputs.reshape(-1)[self.network.gather_index]
        return StateSnapshot(
            degree_class=self.network.degree_class,
            width=self.network.width,
            height=self.network.height,
            boundary=self.network.boundary,
            cycle=self.cycle,
            omega=self.omega,
            storage=self.state.storage.copy(),
            inputs=np.zeros_like(self.state.inputs),
            outputs=outputs.reshape(self.state.outputs.shape),
            potentials=self.state.potentials.copy(),
        )

    def manifest(self) -> dict:
        return {
            "engine": "kinonsim",
            "version": __version__,
            "config_sha256": config_digest(self.config),
            "snapshot_format": SNAPSHOT_FORMAT_VERSION,
        }

