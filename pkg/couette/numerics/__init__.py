"""
Spectral building blocks in the wall-normal coordinate y ∈ [-1, 1]
"""
