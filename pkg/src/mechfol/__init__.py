"""Hill regions, periodic orbits, Conley-Zehnder indices and foliation leaves
for planar mechanical Hamiltonians H = |y|^2/2 + V(x)."""

__version__ = "0.1.0"
