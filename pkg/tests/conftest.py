import pytest

from hybriddelay.delay_core import CGateParams, GateParams

# published model parameters, typed in from the tables
NOR_15NM = dict(r_nA=8360.562682200, r_nB=8255.562682200, r=6699.9626822002,
                c=3.6331599443276e-15, alpha1=0.859e-7, alpha2=0.268e-7, eta=0.01,
                delta_min=18e-12, v_dd=0.8)
NOR_65NM = dict(r_nA=8409.562682200, r_nB=8285.562682200, r=5191.6426822002,
                c=30.6331599443276e-15, alpha1=0.959e-7, alpha2=0.273e-7, eta=0.01,
                delta_min=10.8e-12, v_dd=1.2)
CGATE_15NM = dict(r_n=3002.226, r_p=2912.226, alpha1=0.161e-8, alpha2=0.158e-8,
                  alpha3=0.157e-8, alpha4=0.161e-8, c=3.6331599443276e-15, eta=0.01,
                  delta_min=0.0, v_dd=0.8)

PS = 1e-12


@pytest.fixture
def p15():
    return GateParams(**NOR_15NM)


@pytest.fixture
def p65():
    return GateParams(**NOR_65NM)


@pytest.fixture
def pc():
    return CGateParams(**CGATE_15NM)
