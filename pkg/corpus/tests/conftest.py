from pathlib import Path

CORPUS_ROOT = Path(__file__).resolve().parents[1]
TARGETS_DIR = CORPUS_ROOT / "targets"
