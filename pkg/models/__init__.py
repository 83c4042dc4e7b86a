"""
Models Package
Data models for DroneCAST
"""
from models.radio import COTS, EXPERIMENTAL, LAB, LossReason, RadioProfile
from models.report import LinkStats, SimulationReport
from models.scenario import Scenario, StationRole

__all__ = ["COTS", "EXPERIMENTAL", "LAB", "LossReason", "RadioProfile", "LinkStats", "SimulationReport",
           "Scenario", "StationRole"]
