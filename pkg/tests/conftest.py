import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import driftlab as dl
from driftlab.dirichlet import OperatorSpec, random_coupling


@pytest.fixture(scope="session")
def profile():
    return dl.model_profile(3, 2.0, 0.5, 2.0)


@pytest.fixture(scope="session")
def spectrum():
    return dl.sphere_spectrum(2, 2.0, 4)


@pytest.fixture(scope="session")
def separable_op(profile, spectrum):
    return OperatorSpec(profile=profile, spectrum=spectrum,
                        mode_cut=spectrum.n_modes)


@pytest.fixture(scope="session")
def coupled_op(profile, spectrum):
    cpl = random_coupling(spectrum, spectrum.n_modes, (4.0, 8.0), 0.3, seed=5)
    return OperatorSpec(profile=profile, spectrum=spectrum,
                        mode_cut=spectrum.n_modes, couplings=(cpl,))


@pytest.fixture(scope="session")
def radial_solutions(profile):
    """Fine radial solutions for lambda in {1, 3}, shared across tests."""
    return {lam: dl.solve_radial(profile, lam, 1e4, pts_per_decade=512)
            for lam in (1.0, 3.0)}


@pytest.fixture(scope="session")
def mode_fields(spectrum, radial_solutions):
    u1 = dl.separable_field(spectrum, radial_solutions[1.0], 1)
    u3 = dl.separable_field(spectrum, radial_solutions[3.0], 4)
    return {"u1": u1, "u3": u3}
