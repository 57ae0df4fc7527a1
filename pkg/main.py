"""
dyadic-capacity - Dyadic contents and capacitary maximal operators v1.0
Main entry point
"""
import sys
from pathlib import Path

# Add the repository root to path so `src.` imports resolve
root_path = Path(__file__).parent
sys.path.insert(0, str(root_path))

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
