"""Semi-separable Hamiltonian Monte Carlo."""
