"""Hardness distributions of SLS SAT solvers under random logically equivalent extensions.

Modules: ``cnf`` (formulas, DIMACS, assignments), ``resolution`` (bounded-width
resolution closure, extension sampling), ``solvers`` (SRWA and probSAT),
``generators`` (random and planted k-CNF), ``distributions`` (normal,
lognormal, Johnson SB), ``fitting`` (MLE, chi-square, bootstrap test),
``restarts`` (restart usefulness), ``theory`` (P/Q/R Monte Carlo),
``experiment`` and ``cli``.
"""

__version__ = "0.1.0"
