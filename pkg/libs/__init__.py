"""Generalized-drift SDE library: measures, transforms, simulation and checks."""
