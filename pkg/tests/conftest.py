"""Shared fixtures: discretized operator pairs reused across test modules."""

import numpy as np
import pytest

from liftlab.core import make_grid, quadratic_potential
from liftlab.generators import (
    RtpParams,
    overdamped_generator_1d,
    rtp_generator,
    sticky_bm_generator,
    zigzag_generator_1d,
)
from liftlab.spectral import spectral_gap


@pytest.fixture(scope="session")
def rtp_pair_100():
    """RTP lift over sticky BM, omega = L = 1, 100 interior nodes."""
    grid = make_grid(1.0, 100)
    split = rtp_generator(grid, RtpParams(omega=1.0, length_L=1.0))
    collapse, mu = sticky_bm_generator(grid, 1.0)
    return {
        "grid": grid,
        "split": split,
        "collapse": collapse,
        "mu": mu,
        "m": spectral_gap(collapse),
    }


@pytest.fixture(scope="session")
def sticky_200():
    """Sticky BM operator and measure, omega = L = 1, 200 interior nodes."""
    grid = make_grid(1.0, 200)
    collapse, mu = sticky_bm_generator(grid, 1.0)
    return {"grid": grid, "op": collapse, "mu": mu, "m": spectral_gap(collapse)}


@pytest.fixture(scope="session")
def zigzag_pair_80():
    """1D Zig-Zag lift over the overdamped diffusion for U = x^2/2."""
    U = quadratic_potential([1.0])
    width = 4.0
    grid = make_grid(2.0 * width, 80)
    split = zigzag_generator_1d(grid, U, 1.0, x_min=-width)
    collapse, mu = overdamped_generator_1d(grid, U, x_min=-width)
    return {
        "grid": grid,
        "split": split,
        "collapse": collapse,
        "mu": mu,
        "m": spectral_gap(collapse),
        "U": U,
    }
