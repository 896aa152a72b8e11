import sys
from pathlib import Path

SHIM_DIR = Path(__file__).resolve().parent.parent
if str(SHIM_DIR) not in sys.path:
    sys.path.insert(0, str(SHIM_DIR))

SHIM_PATH = SHIM_DIR / "mosaic_shim.py"
