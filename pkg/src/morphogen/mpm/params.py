"""Simulation parameters and their derived kernel constants."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class SimParams:
    """Hyperparameters of a rollout.

    Dynamical constants (gravity, stiffness, damping, actuation) act
    directly in simulation units on the unit-square domain, with the
    per-particle reference volume folded to one so stress converts to grid
    momentum with coefficient ``dt * 4 / dx**2``.  ``domain_scale`` is a
    purely geometric conversion: centimetres of workspace per simulation
    unit (20 cm of robot maps to 0.25 units).
    """

    timesteps: int = 1024
    dt: float = 1e-3
    grid: int = 128
    gravity: float = 5.4
    friction: float = 0.5
    internal_damping: float = 30.0
    global_damping: float = 2.0
    actuation_strength: float = 4.0
    actuation_omega: float = 40.0  # rad/s; 40 / 2pi ~ 6 Hz
    youngs_base: float = 20.0
    poisson: float = 0.25
    domain_scale: float = 80.0  # cm per simulation unit
    bound: int = 3  # boundary thickness in grid cells

    @property
    def dx(self) -> float:
        return 1.0 / self.grid

    @property
    def floor_height(self) -> float:
        return self.bound * self.dx

    @property
    def duration(self) -> float:
        return self.timesteps * self.dt

    @property
    def mu_factor(self) -> float:
        return 1.0 / (2.0 * (1.0 + self.poisson))

    @property
    def la_factor(self) -> float:
        nu = self.poisson
        return nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def damp_factor(self) -> float:
        return math.exp(-self.global_damping * self.dt)

    @property
    def stress_coeff(self) -> float:
        return self.dt * 4.0 / (self.dx * self.dx)

    def kernel_args(self) -> tuple:
        """Scalar argument pack shared by the forward and adjoint kernels."""
        return (self.grid, self.bound, self.dt, self.gravity, self.friction,
                self.damp_factor, self.internal_damping,
                self.actuation_strength, self.actuation_omega,
                self.mu_factor, self.la_factor, self.stress_coeff)
