"""
Tests for the renyi_portfolio package.
"""
