"""Estimation of Lomax (Pareto type II) parameters."""
