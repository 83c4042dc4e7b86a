"""
DroneCAST Test Suite
"""
