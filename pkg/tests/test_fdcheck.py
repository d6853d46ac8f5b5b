import numpy as np
import pytest

from topoqn.levelset import reference_clover
from topoqn.problems import (
    PoissonConfig,
    PoissonProblem,
    benchmark_mesh,
    disk_triangle_areas,
    generalized_fd_quotient,
    initial_levelset,
    make_problem,
    td_fd_quotient,
)


@pytest.mark.parametrize("center,radius", [((0.0, 0.0), 0.3), ((0.37, -0.81), 0.11), ((1.0, 1.0), 0.05)])
def test_disk_areas_sum(clover16, center, radius):
    areas = disk_triangle_areas(clover16, center, radius)
    assert areas.sum() == pytest.approx(np.pi * radius**2, rel=1e-12)
    assert np.all(areas <= clover16.triangle_areas * (1 + 1e-12))


def test_disk_covering_triangle(clover16):
    areas = disk_triangle_areas(clover16, (0.0, 0.0), 10.0)
    np.testing.assert_allclose(areas[np.abs(clover16.nodes[clover16.triangles]).max(axis=(1, 2)) < 1.5],
                               clover16.triangle_areas[0], rtol=1e-12)


def test_no_contrast_quotient_zero(clover16, rng):
    cfg = PoissonConfig(alpha_in=2.0, alpha_out=2.0, f_in=1.0, f_out=1.0)
    oracle = PoissonProblem(clover16, cfg, rng.standard_normal(clover16.n_nodes))
    psi = initial_levelset(clover16)
    for eps in (0.4, 0.2):
        assert abs(td_fd_quotient(oracle, psi, (0.1, 0.2), eps)) <= 1e-6


def test_disk_validation(clover16):
    oracle = PoissonProblem.from_reference(clover16, reference_clover(clover16))
    psi = initial_levelset(clover16)
    with pytest.raises(ValueError):
        td_fd_quotient(oracle, psi, (1.9, 0.0), 0.2)
    with pytest.raises(ValueError):
        td_fd_quotient(oracle, psi, (0.0, 0.0), -0.1)
    with pytest.raises(ValueError):
        td_fd_quotient(oracle, psi, (0.0, 0.0), 0.1, mode="bogus")
    # a disk crossing the interface of the clover design is rejected
    with pytest.raises(ValueError):
        td_fd_quotient(oracle, reference_clover(clover16), (0.0, 0.0), 1.5)


def test_poisson_64_origin():
    oracle, psi = make_problem("clover_linear", 64)
    quotients = []
    for eps in (0.4, 0.2, 0.1):
        q, formula = generalized_fd_quotient(oracle, psi, (0.0, 0.0), eps)
        quotients.append(q)
    err = np.abs(np.array(quotients) / formula - 1.0)
    assert err[-1] <= 0.25
    assert err[-1] < err[0]
    assert np.all(np.sign(quotients) == np.sign(formula))


def test_nodal_mode_large_disk():
    oracle, psi = make_problem("clover_linear", 32)
    q_exact = td_fd_quotient(oracle, psi, (0.0, 0.0), 0.4)
    q_nodal = td_fd_quotient(oracle, psi, (0.0, 0.0), 0.4, mode="nodal")
    assert np.sign(q_nodal) == np.sign(q_exact)
    assert q_nodal == pytest.approx(q_exact, rel=0.3)


def test_outside_disk_sign():
    # for an empty design the disk adds material; the generalized map keeps the raw sign
    oracle, psi = make_problem("clover_linear", 32)
    q, formula = generalized_fd_quotient(oracle, -psi, (0.8, 0.4), 0.1)
    assert np.sign(q) == np.sign(formula)
    assert q == pytest.approx(formula, rel=0.25)
