"""Barrier-Lagrangian trajectory optimization with ADMM stiffness decoupling."""
__version__ = "0.1.0"
