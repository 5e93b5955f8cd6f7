"""Scale-invariant Poisson soups of planar curves."""
__version__ = "0.1.0"
