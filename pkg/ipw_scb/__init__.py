"""Simultaneous confidence bands for local linear regression with covariates missing at random."""
