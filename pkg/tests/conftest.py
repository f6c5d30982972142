"""Shared fixtures: small deterministic datasets and an ECG-format source.

The ECG pipeline tests prefer real ECG5000 files when the user has placed
them under data/ECG5000/; otherwise a deterministic surrogate with the
same shape (500 rows, length 140, label counts 292/177/10/19/2) is
generated once per session.
"""

from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]

ECG_CANDIDATES = (
    REPO_ROOT / "data" / "ECG5000" / "ECG5000_TRAIN.tsv",
    REPO_ROOT / "data" / "ECG5000" / "ECG5000_TRAIN.txt",
    REPO_ROOT / "data" / "ECG5000" / "ECG5000_TRAIN.csv",
)

ECG_LABEL_COUNTS = {1: 292, 2: 177, 3: 10, 4: 19, 5: 2}
ECG_LENGTH = 140


def write_ecg_surrogate(path: Path) -> Path:
    """Write a stand-in heartbeat file matching the real archive's shape.

    Five classes with distinct waveform templates plus per-row amplitude,
    phase, and additive noise jitter, so distance- and model-based methods
    can separate class 1 from class 2 well above chance.
    """
    rng = np.random.default_rng(424242)
    t = np.arange(ECG_LENGTH)
    templates = {
        1: np.sin(2 * np.pi * 3 * t / ECG_LENGTH) * np.exp(-t / 120.0),
        2: np.sign(np.sin(2 * np.pi * 5 * t / ECG_LENGTH)) * 0.8,
        3: np.cos(2 * np.pi * 2 * t / ECG_LENGTH),
        4: 2.0 * t / ECG_LENGTH - 1.0,
        5: np.sin(2 * np.pi * 8 * t / ECG_LENGTH),
    }
    lines = []
    for label, count in ECG_LABEL_COUNTS.items():
        base = templates[label]
        for _ in range(count):
            amp = 1.0 + 0.15 * rng.normal()
            shift = int(rng.integers(0, 8))
            row = amp * np.roll(base, shift) + 0.10 * rng.normal(size=ECG_LENGTH)
            lines.append("\t".join([str(label)] + [repr(float(v)) for v in row]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="session")
def ecg_path(tmp_path_factory) -> Path:
    for cand in ECG_CANDIDATES:
        if cand.is_file():
            return cand
    return write_ecg_surrogate(tmp_path_factory.mktemp("ecg") / "ECG5000_SURROGATE.tsv")
