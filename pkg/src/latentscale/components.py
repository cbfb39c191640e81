"""Mixture components induced by a grouping of a measure's atoms.

Splitting a fitted mixing measure along an atom labeling yields per-group
masses, renormalized sub-measures, and class conditional densities; the
hard classifier assigns a point to the group maximizing mass times
conditional density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure import (
    Dataset,
    DiscreteMeasure,
    MixtureModel,
    _as_matrix,
    mixture_log_density,
)


@dataclass(frozen=True)
class ComponentModel:
    """Weighted decomposition of a mixture into disjoint atom groups."""

    sigma: float
    lambdas: np.ndarray
    parts: tuple[DiscreteMeasure, ...]
    source: str = ""

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.shape[0] != len(self.parts) or lam.shape[0] == 0:
            raise ValueError("need one lambda per component")
        if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-12:
            raise ValueError("component masses must be a probability vector")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def k(self) -> int:
        return len(self.parts)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "components": [
                {
                    "lambda": float(lam),
                    "atoms": part.atoms.tolist(),
                    "weights": part.weights.tolist(),
                }
                for lam, part in zip(self.lambdas, self.parts)
            ],
        }


def component_model_from_dict(obj: dict) -> ComponentModel:
    comps = obj["components"]
    return ComponentModel(
        sigma=float(obj["sigma"]),
        lambdas=np.array([c["lambda"] for c in comps]),
        parts=tuple(DiscreteMeasure(c["atoms"], c["weights"]) for c in comps),
        source=obj.get("source", ""),
    )


def decompose(measure: DiscreteMeasure, atom_labels, sigma: float, source: str = "") -> ComponentModel:
    """Split ``measure`` along an atom labeling.

    Every atom must carry a label (no noise) and every class must be
    nonempty.  Component k gets mass equal to the summed weights of its
    atoms and a sub-measure renormalized to total mass one; components are
    ordered by their smallest contained atom index, so the result does not
    depend on how the label values are numbered.
    """
    labels = np.asarray(atom_labels, dtype=int)
    if labels.shape != (measure.m,):
        raise ValueError("need one label per atom")
    if np.any(labels < 0):
        raise ValueError("noise labels are not allowed here")
    values, first = np.unique(labels, return_index=True)
    order = values[np.argsort(first)]
    lambdas = []
    parts = []
    for val in order:
        mask = labels == val
        w = measure.weights[mask]
        total = w.sum()
        if total <= 0:
            raise ValueError(f"class {val} has zero mass")
        lambdas.append(total)
        parts.append(DiscreteMeasure(measure.atoms[mask], w / total))
    lam = np.asarray(lambdas)
    return ComponentModel(float(sigma), lam / lam.sum(), tuple(parts), source)


def class_conditional_log_density(model: ComponentModel, k: int, x) -> float | np.ndarray:
    """Log conditional density of component ``k`` at ``x``."""
    if not 0 <= k < model.k:
        raise ValueError(f"component index {k} out of range [0, {model.k})")
    return mixture_log_density(MixtureModel(model.sigma, model.parts[k]), x)


def _score_matrix(model: ComponentModel, points: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        loglam = np.log(model.lambdas)
    cols = [
        loglam[k] + mixture_log_density(MixtureModel(model.sigma, model.parts[k]), points)
        for k in range(model.k)
    ]
    return np.column_stack(cols)


def bayes_classify(model: ComponentModel, x) -> int:
    """Group maximizing log mass plus conditional log density; ties go to
    the smallest index."""
    pt = _as_matrix(np.asarray(x, dtype=float), "x")
    return int(np.argmax(_score_matrix(model, pt)[0]))


def classify_dataset(model: ComponentModel, data: Dataset) -> np.ndarray:
    """Rowwise hard classification of a dataset."""
    if data.d != model.parts[0].d:
        raise ValueError("dimension mismatch between data and components")
    return np.argmax(_score_matrix(model, data.points), axis=1).astype(int)
