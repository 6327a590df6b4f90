"""
Basic tests for the renyi_portfolio package.
"""

from renyi_portfolio import __version__


def test_version():
    """Test that version is a string."""
    assert isinstance(__version__, str)
    assert __version__ == "0.3.0"


def test_import():
    """Test that the package and its modules can be imported."""
    import renyi_portfolio
    from renyi_portfolio import backtest, dists, entropy, experiments, metrics, optim, quadrature, risk

    assert renyi_portfolio is not None
    assert all(m is not None for m in (backtest, dists, entropy, experiments, metrics, optim, quadrature, risk))


def test_errors_share_a_base():
    from renyi_portfolio import errors

    for name in ("ParameterError", "IngestionError", "QuadratureError", "StrategyError", "StudyError"):
        assert issubclass(getattr(errors, name), errors.RenyiPortfolioError)
