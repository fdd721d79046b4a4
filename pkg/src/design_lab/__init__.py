"""Projected ensembles, approximate quantum state designs and numerical checks of their bounds."""
