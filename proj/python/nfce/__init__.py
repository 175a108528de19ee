"""Near-field XL-MIMO channel estimation: SOMP initialization refined by conditional diffusion."""

import json

from . import _nfce
from ._nfce import (
    Checkpoint,
    InvalidArgument,
    NumericalError,
    ShapeError,
    alpha_bar,
    generate_dataset,
    nmse,
    pack_image,
    time_embedding,
    train,
    unpack_image,
)

__all__ = [
    "Checkpoint",
    "InvalidArgument",
    "NumericalError",
    "Scenario",
    "ShapeError",
    "alpha_bar",
    "evaluate",
    "generate_dataset",
    "geometry",
    "nmse",
    "pack_image",
    "steering_vector",
    "time_embedding",
    "train",
    "unpack_image",
]


def _dump(cfg):
    return "" if cfg is None else json.dumps(cfg)


def geometry(system=None):
    """Wavelength, aperture, Fraunhofer/Fresnel distances and grids for a system config dict."""
    return _nfce.geometry(_dump(system))


def steering_vector(angle, distance, model="exact", system=None):
    """Unit-norm array response for angle (rad) and distance (m); model is exact, fresnel or planar."""
    return _nfce.steering_vector(angle, distance, model, _dump(system))


class Scenario(_nfce.Scenario):
    """Simulation scenario; config is a dict in the same layout as the JSON config files."""

    def __init__(self, config=None):
        super().__init__(_dump(config))


def evaluate(axis, grid, methods=("somp",), trials=200, scenario=None, checkpoint="", steps=50,
             sigma="zero", snr_db=5.0, seed=0, clip_x0=False):
    """Runs an NMSE sweep; returns {"rows": [...], "fraunhofer_m": float | None}."""
    return _nfce.evaluate(axis, list(grid), list(methods), trials, _dump(scenario), str(checkpoint), steps,
                          sigma, snr_db, seed, clip_x0)
