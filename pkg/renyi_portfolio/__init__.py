"""
Renyi Portfolio - exponential Renyi entropy as a deviation risk measure.

Spacings-based entropy estimation, Renyi-optimal portfolios and a rolling
backtest engine comparing them with variance and tail-risk competitors.
"""

__version__ = "0.3.0"
