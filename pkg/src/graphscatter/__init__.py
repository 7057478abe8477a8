"""Graph scattering transforms and their stability to relative perturbations."""

__version__ = "0.1.0"
