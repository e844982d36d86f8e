import sys
from pathlib import Path

# allow running the tests straight from a checkout, without installing
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
