"""Monte Carlo estimators and explicit local bounds for heat semigroups on
differential forms under quasi-isometric metric changes."""

__version__ = "0.1.0"
