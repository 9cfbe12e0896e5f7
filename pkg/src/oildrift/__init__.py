"""Coupled ocean/wind/wave flow and Lagrangian oil-drift simulator.

A lean 2D staggered-grid flow solver supplies surface currents and 10 m
winds; closed-form vertical profiles (tidal, wind shear, Ekman spiral,
Stokes drift) extend them over the water column; a parametric directional
wave model feeds entrainment and drift; oil is carried by a stochastic
Lagrangian particle model; and a Monte-Carlo layer aggregates many
realizations into presence-probability maps.
"""

__version__ = "0.1.0"
