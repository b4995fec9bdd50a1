"""Synthetic acoustic scores: the desk-scale stand-in for an acoustic model.

Scores are -log-likelihood costs, frames x units; lower is better.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, UsageError


def inventory_hash(units: tuple[str, ...]) -> str:
    return hashlib.sha256(" ".join(sorted(units)).encode()).hexdigest()[:16]


@dataclass
class AcousticScores:
    matrix: np.ndarray  # (frames, units) float64 costs
    units: tuple[str, ...]  # column order

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.units):
            raise DataFormatError("score matrix shape does not match the unit inventory")
        if not np.isfinite(self.matrix).all():
            raise DataFormatError("score matrix has non-finite entries")

    @property
    def num_frames(self) -> int:
        return self.matrix.shape[0]

    def column(self, unit: str) -> int:
        try:
            return self.units.index(unit)
        except ValueError:
            raise DataFormatError(f"unit {unit!r} not in the score inventory") from None


def synth_acoustic_scores(
    ref_units: list[str],
    inventory: tuple[str, ...],
    frames_per_unit: int = 3,
    margin: float = 4.0,
    noise_sd: float = 0.0,
    seed: int = 0,
) -> AcousticScores:
    """Deterministic synthetic costs: the reference unit of each frame costs
    ~0, every other unit ~margin, plus optional Gaussian noise."""
    if not ref_units:
        raise UsageError("empty reference unit sequence")
    if frames_per_unit < 1:
        raise UsageError("frames_per_unit must be >= 1")
    if margin <= 0:
        raise UsageError("margin must be positive")
    cols = {u: i for i, u in enumerate(inventory)}
    for u in ref_units:
        if u not in cols:
            raise DataFormatError(f"reference unit {u!r} not in inventory")
    frames = len(ref_units) * frames_per_unit
    mat = np.full((frames, len(inventory)), margin, dtype=np.float64)
    for i, u in enumerate(ref_units):
        mat[i * frames_per_unit : (i + 1) * frames_per_unit, cols[u]] = 0.0
    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        mat = mat + noise_sd * rng.standard_normal(mat.shape)
    return AcousticScores(mat, tuple(inventory))


# -- file I/O (text matrix with a header) ----------------------------------


def write_scores(scores: AcousticScores, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(
            f"# frames={scores.num_frames} units={len(scores.units)} "
            f"hash={inventory_hash(scores.units)}\n"
        )
        f.write("# " + " ".join(scores.units) + "\n")
        for row in scores.matrix:
            f.write(" ".join(f"{x:.9g}" for x in row) + "\n")


def read_scores(path: str) -> AcousticScores:
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 4 or header[0] != "#":
            raise DataFormatError(f"{path}:1: bad scores header")
        try:
            fields = dict(kv.split("=") for kv in header[1:])
            frames, n_units = int(fields["frames"]), int(fields["units"])
        except (ValueError, KeyError):
            raise DataFormatError(f"{path}:1: bad scores header") from None
        unit_line = f.readline().split()
        if unit_line[:1] != ["#"] or len(unit_line) != n_units + 1:
            raise DataFormatError(f"{path}:2: bad unit list")
        units = tuple(unit_line[1:])
        rows = []
        for lineno, line in enumerate(f, 3):
            vals = line.split()
            if not vals:
                continue
            if len(vals) != n_units:
                raise DataFormatError(f"{path}:{lineno}: expected {n_units} columns")
            rows.append([float(v) for v in vals])
    if len(rows) != frames:
        raise DataFormatError(f"{path}: header says {frames} frames, found {len(rows)}")
    scores = AcousticScores(np.array(rows, dtype=np.float64), units)
    if fields["hash"] != inventory_hash(units):
        raise DataFormatError(f"{path}: inventory hash mismatch")
    return scores
