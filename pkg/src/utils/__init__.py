"""Infrastructure shared by the lattice-gas modules: errors, configuration, random streams, export and the run registry."""
