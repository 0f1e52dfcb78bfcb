"""Co-simulation of coupled dynamical systems.

Sub-modules:

- ``linlab``: linear two-state coupled test system, exact step matrices
  and spectral-radius stability analysis of the parallel and series
  coupling schedules.
- ``cosim``: generic macro-step co-simulation orchestrator.
- ``integrators``: trapezoidal DAE stepping, Euler micro-stepping and an
  adaptive explicit Runge-Kutta kernel.
- ``power``: phasor-domain transmission and distribution sub-system models.
- ``engine``: scenario-level combined transmission-distribution runs.
- ``scenario_io`` / ``cli``: scenario files, CSV emission, command line.
"""

__version__ = "0.1.0"
