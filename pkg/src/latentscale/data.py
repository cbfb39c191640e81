"""Seeded generators for the simulated benchmark densities and CSV ingestion.

Each generator draws latent positions from a named mixing measure over 2-d
supports (squares, circles, arcs, or point masses) and convolves them with
isotropic Gaussian noise of scale ``sigma_true``; the drawn component index
is kept as the ground-truth label.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .measure import Dataset


class CsvFormatError(ValueError):
    """Malformed dataset file (bad value or ragged row)."""


GENERATOR_NAMES = ("four-squares", "circles-2", "circles-3", "two-moons", "four-modes")

_SQUARE_CENTERS = np.array([(1.5, 1.5), (-1.5, -1.5), (1.5, -1.5), (-1.5, 1.5)])
_SQUARE_WEIGHTS = np.array([0.4, 0.3, 0.2, 0.1])
# printed arc weights 0.3/0.6 do not sum to one; renormalized at construction
_MOON_WEIGHTS = np.array([0.3, 0.6]) / 0.9
_MODE_WEIGHTS = np.array([0.4, 0.3, 0.2, 0.1])


@dataclass(frozen=True)
class GeneratorSpec:
    """Named simulated density plus sample size, noise scale, and seed."""

    name: str
    n: int
    sigma_true: float = 0.5
    seed: int = 0
    centers: tuple | None = None  # four-modes only

    def __post_init__(self):
        if self.name not in GENERATOR_NAMES:
            raise ValueError(f"unknown generator {self.name!r}; choose from {GENERATOR_NAMES}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.sigma_true < 0:
            raise ValueError("sigma_true must be nonnegative")


def _component_choice(rng, weights, n):
    return rng.choice(len(weights), size=n, p=weights)


def generate(spec: GeneratorSpec) -> Dataset:
    """Draw a labeled sample from the named density.

    Per row: a component index is drawn from the component weights, a latent
    position uniformly on that component's support (square area or circle /
    arc length), and Gaussian noise of scale ``sigma_true`` is added.
    """
    rng = np.random.default_rng(int(spec.seed) & 0xFFFFFFFFFFFFFFFF)
    n = spec.n

    if spec.name == "four-squares":
        ks = _component_choice(rng, _SQUARE_WEIGHTS, n)
        latent = _SQUARE_CENTERS[ks] + rng.uniform(-1.0, 1.0, size=(n, 2))
    elif spec.name == "circles-2":
        radii = np.array([1.0, 3.0])
        ks = _component_choice(rng, np.array([0.5, 0.5]), n)
        ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
        latent = radii[ks, None] * np.column_stack([np.cos(ang), np.sin(ang)])
    elif spec.name == "circles-3":
        radii = np.array([1.0, 5.0, 9.0])
        ks = _component_choice(rng, np.array([0.3, 0.3, 0.4]), n)
        ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
        latent = radii[ks, None] * np.column_stack([np.cos(ang), np.sin(ang)])
    elif spec.name == "two-moons":
        ks = _component_choice(rng, _MOON_WEIGHTS, n)
        ang = rng.uniform(0.0, np.pi, size=n)
        arc = np.column_stack([np.cos(ang), np.sin(ang)])
        latent = np.where(ks[:, None] == 0, arc, np.array([1.0, 0.5]) - arc)
    else:  # four-modes: point masses with distinct weights
        centers = np.asarray(spec.centers if spec.centers is not None else _SQUARE_CENTERS, dtype=float)
        if centers.shape != (4, 2):
            raise ValueError("four-modes centers must be four 2-d points")
        ks = _component_choice(rng, _MODE_WEIGHTS, n)
        latent = centers[ks]

    noise = spec.sigma_true * rng.standard_normal((n, 2))
    return Dataset(points=latent + noise, labels=ks.astype(int), name=spec.name)


def true_component_count(name: str) -> int:
    return {"four-squares": 4, "circles-2": 2, "circles-3": 3, "two-moons": 2, "four-modes": 4}[name]


# ---------------------------------------------------------------------------
# CSV format: one row per sample, d coordinate columns, optional trailing
# integer column named "label"; UTF-8, "." decimal separator.
# ---------------------------------------------------------------------------

def save_csv(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"x{i}" for i in range(data.d)]
        if data.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.points[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            writer.writerow(row)


def load_csv(path, name: str | None = None) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        has_label = bool(header) and header[-1] == "label"
        width = len(header)
        d = width - 1 if has_label else width
        if d < 1:
            raise CsvFormatError(f"{path}: no coordinate columns")
        points, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise CsvFormatError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                )
            try:
                points.append([float(v) for v in row[:d]])
                if has_label:
                    labels.append(int(row[d]))
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
    if not points:
        raise CsvFormatError(f"{path}: no data rows")
    return Dataset(
        points=np.asarray(points, dtype=float),
        labels=np.asarray(labels, dtype=int) if has_label else None,
        name=name if name is not None else str(path),
    )


def write_generator_sidecar(spec: GeneratorSpec, csv_path) -> str:
    """Echo the generator settings next to the CSV for provenance."""
    sidecar = f"{csv_path}.meta.json"
    payload = asdict(spec)
    if payload.get("centers") is not None:
        payload["centers"] = [list(map(float, c)) for c in payload["centers"]]
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
