import numpy as np
import pytest

from heatforms.manifold import (ConformalFactor, ConformalModel,
                                EuclideanModel, FlatTorusModel,
                                HyperbolicModel, SphereModel)


@pytest.fixture(scope="session")
def euclid2():
    return EuclideanModel(2)


@pytest.fixture(scope="session")
def torus2():
    return FlatTorusModel(2, [1.0, 1.0])


@pytest.fixture(scope="session")
def sphere2():
    return SphereModel(2)


@pytest.fixture(scope="session")
def hyperbolic2():
    return HyperbolicModel(2)


@pytest.fixture(scope="session")
def conformal_torus():
    psi = ConformalFactor("gaussian_bump", amplitude=0.35, sigma=0.25,
                          center=[0.5, 0.5], periods=[1.0, 1.0])
    return ConformalModel(FlatTorusModel(2, [1.0, 1.0]), psi)


@pytest.fixture(scope="session")
def conformal_euclid():
    psi = ConformalFactor("gaussian_bump", amplitude=0.3, sigma=0.5)
    return ConformalModel(EuclideanModel(2), psi)


@pytest.fixture(scope="session")
def all_models(euclid2, torus2, sphere2, hyperbolic2, conformal_torus):
    return {"euclidean": euclid2, "flat_torus": torus2, "sphere": sphere2,
            "hyperbolic": hyperbolic2, "conformal": conformal_torus}


def model_point(model):
    if isinstance(model, SphereModel):
        return model.default_point()
    if isinstance(model, ConformalModel):
        if isinstance(model.base, FlatTorusModel):
            return np.array([0.55, 0.45])
        return np.array([0.2, -0.1])
    if isinstance(model, FlatTorusModel):
        return np.array([0.3, 0.4])
    return np.array([0.2, -0.1])
