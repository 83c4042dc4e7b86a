"""
DroneCAST - Drone-to-drone communication simulator
Main entry point
"""
import sys

from ui.cli import main

if __name__ == "__main__":
    sys.exit(main())
