"""
Simulator core tests
"""
