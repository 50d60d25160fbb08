"""
data/ — lattice, initial profiles and scenario files
"""
