"""Paths of the data files bundled with the package."""

from pathlib import Path

_DATA_DIR = Path(__file__).resolve().parent / "data"


def data_path(name: str) -> Path:
    """Absolute path of a bundled data file."""
    return _DATA_DIR / name


DEMO_CATALOG = data_path("icd10_demo.tsv")
ORIGINAL_ROADMAP = data_path("roadmap_original.csv")
DEFAULT_THRESHOLDS = data_path("thresholds.csv")
