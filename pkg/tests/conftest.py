import pytest

from jumpcir import DelayCoefficient, JumpCoefficient, ModelSpec, SchemeConfig


def benchmark_model(alpha=0.5, gamma=1.0, **overrides):
    """The experiment parameterization used throughout the studies:
    k1=0.24, k2=3, k3=0.4, b(x)=x**gamma, g(x)=2x, lam=tau=T=1, xi=1."""
    params = dict(
        k1=0.24, k2=3.0, k3=0.4, alpha=alpha, lam=1.0, tau=1.0, horizon=1.0,
        delay_coeff=DelayCoefficient("power", gamma=gamma),
        jump_coeff=JumpCoefficient("linear", scale=2.0, lipschitz_L=1.0,
                                   positive=True),
    )
    params.update(overrides)
    return ModelSpec(**params)


@pytest.fixture
def model_cir():
    return benchmark_model(alpha=0.5, gamma=1.0)


@pytest.fixture
def model_cev07():
    return benchmark_model(alpha=0.7, gamma=0.5)


@pytest.fixture
def model_cev09():
    return benchmark_model(alpha=0.9, gamma=0.5)


@pytest.fixture
def config32():
    return SchemeConfig(delta=2.0 ** -5)
