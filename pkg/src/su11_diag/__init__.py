"""su11-diag - Two-step displacement diagonalization of SU(1,1)-linear two-mode Hamiltonians."""

__version__ = "0.1.0"
