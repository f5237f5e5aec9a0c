"""Numerical core: grids, spectral theory, bound states, evolution and asymptotics."""
