"""Online edge coloring via online rounding of bipartite fractional matchings."""

__version__ = "0.1.0"
