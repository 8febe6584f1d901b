"""Functional-discrete method for Cauchy problems of ODE systems."""
