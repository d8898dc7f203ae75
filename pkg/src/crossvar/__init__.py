"""Cross-variation laboratory for Young-integral processes driven by
long-memory fractional Brownian motion.

The package is organised as a small library plus a CLI front end:

- ``crossvar.fbm``         exact fractional Brownian motion sampling and
                           Hoelder machinery
- ``crossvar.young``       discrete Young integration and model simulation
- ``crossvar.stats``       cross-variation statistics, rates and limit
                           constants
- ``crossvar.experiments`` Monte Carlo experiment harness
- ``crossvar.htest``       studentized test of vanishing cross-loadings
- ``crossvar.cli``         command-line entry point
"""

__version__ = "0.1.0"
