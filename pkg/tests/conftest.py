"""
Pytest configuration and fixtures for DroneCAST tests
"""
import os
import sys
import pytest
import tempfile
import shutil

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the full-size sweeps marked slow")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size sweep, skipped unless --runslow is given")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="full-size sweep; run with --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def temp_workspace():
    """Create a temporary output directory for testing"""
    temp_dir = tempfile.mkdtemp(prefix="dronecast_test_")
    yield temp_dir
    shutil.rmtree(temp_dir, ignore_errors=True)


@pytest.fixture
def scenario_text():
    """Minimal valid scenario: two drones crossing over open ground, one monitor"""
    return '''
name = "crossing"
seed = 3
duration = 6.0

[scene]
area = [-200.0, -200.0, 200.0, 200.0]

[[drones]]
id = 1
radio = "cots"
waypoints = [
    { position = [-60.0, 0.0, 30.0], speed = 10.0 },
    { position = [60.0, 0.0, 30.0] },
]

[[drones]]
id = 2
radio = "cots"
waypoints = [
    { position = [0.0, -60.0, 30.0], speed = 10.0 },
    { position = [0.0, 60.0, 30.0] },
]

[[ground_stations]]
id = 1000
role = "MONITOR"
position = [0.0, 0.0, 2.0]
'''


@pytest.fixture
def scenario_file(temp_workspace, scenario_text):
    """Scenario text written to disk"""
    path = os.path.join(temp_workspace, "crossing.toml")
    with open(path, "w", encoding="utf-8") as f:
        f.write(scenario_text)
    return path


@pytest.fixture
def out_dir(monkeypatch, temp_workspace):
    """Output directory with the environment override cleared"""
    monkeypatch.delenv("DRONECAST_SIM_OUT", raising=False)
    path = os.path.join(temp_workspace, "out")
    return path
