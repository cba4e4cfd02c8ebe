"""Fit artifact: a JSON file that reconstructs the fitted approximation exactly.

Python floats survive a json round trip bit for bit, so a reloaded artifact
reproduces log-density values exactly.  ``wall_clock_seconds`` is the one
field that varies between otherwise identical runs.
"""

import json
from dataclasses import dataclass

import numpy as np

from .copula_va import VariationalParams
from .elliptical import EllipticalFamily
from .errors import DataError
from .factor_scale import FactorScale
from .transforms import TransformKind, TransformStack

FORMAT_VERSION = 1


@dataclass(frozen=True)
class FitArtifact:
    params: VariationalParams
    lb_bar: float
    steps: int
    seed: int
    config: dict
    target_meta: dict
    wall_clock_seconds: float

    def to_dict(self):
        tr = self.params.transforms
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config,
            "target": self.target_meta,
            "m": self.params.m,
            "factors": self.params.K,
            "family": self.params.family.kind.value,
            "transform": tr.kind.value,
            "va": {
                "mu": tr.mu.tolist(),
                "log_sigma": tr.log_sigma.tolist(),
                "gamma_raw": tr.gamma_raw.tolist(),
                "tau": self.params.scale.tau.tolist(),
                "omega_raw": self.params.family.omega_raw.tolist(),
            },
            "lb_bar": self.lb_bar,
            "steps": self.steps,
            "seed": self.seed,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def save_artifact(artifact, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(artifact.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_artifact(path):
    """Rebuild (FitArtifact, VariationalParams) from a saved JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a JSON artifact ({exc})") from exc
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a JSON object, got {type(doc).__name__}")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported artifact format "
                        f"{doc.get('format_version')!r} (expected {FORMAT_VERSION})")
    try:
        m = int(doc["m"])
        K = int(doc["factors"])
        va = doc["va"]
        kind = TransformKind.from_name(doc["transform"])
        tr = TransformStack(kind=kind,
                            gamma_raw=np.asarray(va["gamma_raw"], dtype=np.float64).reshape(m, -1),
                            mu=np.asarray(va["mu"], dtype=np.float64),
                            log_sigma=np.asarray(va["log_sigma"], dtype=np.float64))
        scale = FactorScale(tau=np.asarray(va["tau"], dtype=np.float64).reshape(m, K))
        fam = EllipticalFamily.make(doc["family"])
        fam = EllipticalFamily(fam.kind, np.asarray(va["omega_raw"], dtype=np.float64))
        params = VariationalParams(transforms=tr, scale=scale, family=fam)
        art = FitArtifact(params=params, lb_bar=float(doc["lb_bar"]), steps=int(doc["steps"]),
                          seed=int(doc["seed"]), config=doc.get("config", {}),
                          target_meta=doc.get("target", {}),
                          wall_clock_seconds=float(doc["wall_clock_seconds"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"{path}: missing or malformed artifact field ({exc})") from exc
    return art, params
