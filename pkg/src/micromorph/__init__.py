"""Micromorphic elasticity: Eshelby stress, angular momentum and scaling fluxes."""
