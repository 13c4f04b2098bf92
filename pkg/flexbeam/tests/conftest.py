"""Shared fixtures: reference rig, a uniform beam and cached tables."""

from __future__ import annotations

import pytest

from flexbeam.numerics.beam import (
    BeamConfig,
    SpatialGrid,
    make_beam_config,
    reference_config,
)
from flexbeam.numerics.genfun import GenFunTable, compute_gen_fun_table

# rho = EI = 1 on [0, 1]; closed forms exist for the first levels
UNIFORM_M = 0.5
UNIFORM_J = 0.1


@pytest.fixture(scope="session")
def ref_cfg() -> BeamConfig:
    return reference_config()


@pytest.fixture(scope="session")
def uniform_cfg() -> BeamConfig:
    return make_beam_config(
        1.0,
        UNIFORM_M,
        UNIFORM_J,
        {"kind": "affine", "a": 1.0},
        {"kind": "affine", "a": 1.0},
    )


@pytest.fixture(scope="session")
def ref_table(ref_cfg: BeamConfig) -> GenFunTable:
    """21 levels on 600 intervals, so the 150-interval field grid hits nodes."""
    return compute_gen_fun_table(ref_cfg, SpatialGrid(ref_cfg.L, 600), 21)


@pytest.fixture(scope="session")
def uniform_table(uniform_cfg: BeamConfig) -> GenFunTable:
    return compute_gen_fun_table(
        uniform_cfg, SpatialGrid(1.0, 256), 4, check_refinement=False
    )
