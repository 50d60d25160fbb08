"""
models/ — kernel, Picard solver, finite-difference oracle and checks
"""
