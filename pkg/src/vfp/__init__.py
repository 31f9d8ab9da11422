"""Nonlinear Vlasov-Fokker-Planck solver with property audits."""
__version__ = "0.1.0"
