"""Exact zero-order-hold propagation of ensemble members and error measures."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .linalg import zoh_discretize
from .model import AffineState, compute_xi
from .synthesis import DEFAULT_TRUNC_REL, assemble_operator, min_energy_control

DEFAULT_SUBSTEPS = 8


@dataclass(frozen=True, eq=False)
class EnsembleTrajectory:
    grid: object
    times: np.ndarray
    states: np.ndarray  # (grid size, time samples, n)

    @property
    def final_states(self):
        return self.states[:, -1, :]

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        n = self.states.shape[2]
        w.writerow(["beta", "t"] + [f"x_{i + 1}" for i in range(n)])
        for b, traj in zip(self.grid.samples, self.states):
            for t, x in zip(self.times, traj):
                w.writerow([repr(float(b)), repr(float(t))] + [repr(float(v)) for v in x])


def propagate(system, beta, control, X0, substeps=DEFAULT_SUBSTEPS):
    """States at every substep boundary under the piecewise-constant ``control``.

    Returns ``(times, states)`` with ``states`` shaped ``(Nt*substeps + 1, n)``.
    """
    tol = 1e-12 * max(1.0, abs(system.K.lo), abs(system.K.hi))
    if not system.K.contains(beta, tol):
        raise InputError(f"beta = {beta} lies outside K = [{system.K.lo}, {system.K.hi}]")
    if int(substeps) != substeps or substeps < 1:
        raise InputError("substeps must be a positive integer")
    x = np.asarray(X0, dtype=float).ravel()
    if x.size != system.n:
        raise InputError(f"initial state has {x.size} entries, expected {system.n}")
    if control.m != system.m:
        raise InputError(f"control has {control.m} channels, system has {system.m}")
    mesh = control.mesh
    h = mesh.dt / substeps
    Ad, Bd = zoh_discretize(system.A(beta), system.B(beta), h)
    states = np.empty((mesh.Nt * substeps + 1, system.n))
    states[0] = x
    idx = 1
    for k in range(mesh.Nt):
        forced = Bd @ control.values[k]
        for _ in range(substeps):
            x = Ad @ x + forced
            states[idx] = x
            idx += 1
    times = np.concatenate([[0.0], (np.arange(1, mesh.Nt * substeps + 1) * h)])
    times[-1] = mesh.T
    return times, states


def simulate_ensemble(system, grid, control, X0, substeps=DEFAULT_SUBSTEPS):
    """Propagate every grid member; ``X0`` is an AffineState or a callable of beta."""
    runs = [propagate(system, b, control, X0(b), substeps) for b in grid.samples]
    return EnsembleTrajectory(grid, runs[0][0], np.stack([s for _, s in runs]))


def _final_targets(traj, XF):
    if isinstance(XF, AffineState) or callable(XF):
        return np.array([np.asarray(XF(b), dtype=float).ravel() for b in traj.grid.samples])
    return np.asarray(XF, dtype=float).reshape(traj.final_states.shape)


def per_beta_errors(traj, XF):
    return np.linalg.norm(traj.final_states - _final_targets(traj, XF), axis=1)


def ensemble_error(traj, XF, norm="sup"):
    """Final-state distance to ``XF``: max Euclidean error or weighted L2 over K."""
    e = per_beta_errors(traj, XF)
    if norm == "sup":
        return float(np.max(e))
    if norm == "l2":
        return float(math.sqrt(np.sum(traj.grid.weights * e ** 2)))
    raise InputError(f"unknown norm {norm!r} (expected 'sup' or 'l2')")


@dataclass(frozen=True, eq=False)
class ScenarioRun:
    synthesis: object
    trajectory: EnsembleTrajectory
    sup_error: float
    l2_error: float
    relative_sup_error: float
    per_beta: np.ndarray = field(repr=False)

    def error_summary(self):
        return {
            "sup_error": self.sup_error,
            "l2_error": self.l2_error,
            "relative_sup_error": self.relative_sup_error,
            "per_beta_errors": [{"beta": float(b), "error": float(e)}
                                for b, e in zip(self.trajectory.grid.samples, self.per_beta)],
        }


def run_scenario(scenario, grid, mesh, trunc_rel=DEFAULT_TRUNC_REL, substeps=DEFAULT_SUBSTEPS, threads=1):
    """Synthesize the minimum-energy control for ``scenario`` and simulate it on ``grid``."""
    if abs(mesh.T - scenario.T) > 1e-12 * max(1.0, scenario.T):
        raise InputError(f"mesh horizon {mesh.T} differs from scenario horizon {scenario.T}")
    system = scenario.system
    xi = compute_xi(scenario, grid)
    op = assemble_operator(system, grid, mesh, threads=threads)
    result = min_energy_control(op, xi, trunc_rel)
    traj = simulate_ensemble(system, grid, result.control, scenario.X0, substeps)
    per = per_beta_errors(traj, scenario.XF)
    sup = float(np.max(per))
    l2 = float(math.sqrt(np.sum(grid.weights * per ** 2)))
    scale = max(float(np.max(np.linalg.norm(scenario.XF(grid.samples), axis=1))), np.finfo(float).tiny)
    return ScenarioRun(result, traj, sup, l2, sup / scale, per)
