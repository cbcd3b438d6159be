"""A named matrix of SISO transfer functions around a steady operating point.

The plant is the simulation stand-in for the real process: CV rows, MV
columns, an optional TransferFunction per pair (absent means no coupling),
and the steady-state MV/CV values that anchor relative step sizes and
absolute traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ioutil import SchemaError, require
from .lti import TransferFunction


@dataclass
class PlantMatrix:
    cv_names: list[str]
    mv_names: list[str]
    u_ss: np.ndarray
    z_ss: np.ndarray
    entries: dict = field(default_factory=dict)  # (cv_index, mv_index) -> TF

    def __post_init__(self):
        self.cv_names = [str(n) for n in self.cv_names]
        self.mv_names = [str(n) for n in self.mv_names]
        if len(set(self.cv_names)) != len(self.cv_names):
            raise SchemaError("cv_names must be unique")
        if len(set(self.mv_names)) != len(self.mv_names):
            raise SchemaError("mv_names must be unique")
        self.u_ss = np.asarray(self.u_ss, dtype=float).ravel()
        self.z_ss = np.asarray(self.z_ss, dtype=float).ravel()
        if self.u_ss.size != len(self.mv_names):
            raise SchemaError("u_ss length must match mv_names")
        if self.z_ss.size != len(self.cv_names):
            raise SchemaError("z_ss length must match cv_names")
        q, p = len(self.cv_names), len(self.mv_names)
        for (i, j), tf in self.entries.items():
            if not (0 <= i < q and 0 <= j < p):
                raise SchemaError(f"entry index ({i}, {j}) out of range")
            if not isinstance(tf, TransferFunction):
                raise SchemaError(f"entry ({i}, {j}) is not a TransferFunction")

    @property
    def n_outputs(self) -> int:
        return len(self.cv_names)

    @property
    def n_inputs(self) -> int:
        return len(self.mv_names)

    def entry(self, i: int, j: int) -> TransferFunction | None:
        return self.entries.get((i, j))

    def entry_by_name(self, cv: str, mv: str) -> TransferFunction | None:
        return self.entries.get((self.cv_names.index(cv), self.mv_names.index(mv)))

    def dc_gain_matrix(self) -> np.ndarray:
        """Steady-state gains; absent couplings contribute zero."""
        g = np.zeros((self.n_outputs, self.n_inputs))
        for (i, j), tf in self.entries.items():
            g[i, j] = tf.k0
        return g

    def to_dict(self) -> dict:
        entries = {}
        for (i, j), tf in sorted(self.entries.items()):
            entries[f"{self.cv_names[i]}/{self.mv_names[j]}"] = tf.to_dict()
        return {
            "kind": "plant_matrix",
            "cv_names": list(self.cv_names),
            "mv_names": list(self.mv_names),
            "z_ss": [float(v) for v in self.z_ss],
            "u_ss": [float(v) for v in self.u_ss],
            "entries": entries,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PlantMatrix":
        cv_names = list(require(obj, "cv_names", "plant_matrix"))
        mv_names = list(require(obj, "mv_names", "plant_matrix"))
        z_ss = require(obj, "z_ss", "plant_matrix")
        u_ss = require(obj, "u_ss", "plant_matrix")
        entries = {}
        for key, tf_obj in require(obj, "entries", "plant_matrix").items():
            if "/" not in key:
                raise SchemaError(f"entry key '{key}' must be 'cv/mv'")
            cv, mv = key.split("/", 1)
            if cv not in cv_names:
                raise SchemaError(f"entry key '{key}' names unknown CV '{cv}'")
            if mv not in mv_names:
                raise SchemaError(f"entry key '{key}' names unknown MV '{mv}'")
            entries[(cv_names.index(cv), mv_names.index(mv))] = \
                TransferFunction.from_dict(tf_obj)
        return cls(cv_names=cv_names, mv_names=mv_names,
                   u_ss=u_ss, z_ss=z_ss, entries=entries)


def diagonal_plant(cv_names, mv_names, models, u_ss, z_ss) -> PlantMatrix:
    """Build a plant whose only couplings are the (i, i) diagonal."""
    if not (len(cv_names) == len(mv_names) == len(models)):
        raise SchemaError("diagonal plant needs equal-length name/model lists")
    entries = {(i, i): tf for i, tf in enumerate(models)}
    return PlantMatrix(cv_names=list(cv_names), mv_names=list(mv_names),
                       u_ss=u_ss, z_ss=z_ss, entries=entries)
