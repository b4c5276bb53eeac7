import math

import numpy as np
import pytest

from ductpinn.autodiff import Jet2, fd_check
from ductpinn.errors import ConfigurationError, DomainError, NumericalFailure
from ductpinn.media import air_ntp
from ductpinn.network import Architecture, NetworkParams, flatten, init_params, jet_outputs, unflatten
from ductpinn.oracle import meanflow_analytic, narrow_analytic, uniform_analytic, webster_bvp
from ductpinn.physics import (AreaProfile, DuctProblem, ResidualBatch, helmholtz, lagrange_loss,
                              lambda_hat, lambda_update, loss_mean_square, mean_square, meanflow,
                              momentum, narrow, pressure_residuals, residual_helmholtz,
                              residual_meanflow, residual_momentum, residual_narrow,
                              residual_webster, webster)
from ductpinn.trial import BoundaryConditions, DuctGeometry, TrialField, trial_parts

G = DuctGeometry()
BC = BoundaryConditions(1.0, -1.0)
AIR = air_ntp()
RNG = np.random.default_rng(0)
X64 = np.sort(RNG.uniform(0.0, 1.0, 64))


def zero_field(outputs=1, bc=BC, geometry=G):
    arch = Architecture.mlp(1, 3, outputs)
    return TrialField(unflatten(np.zeros(arch.param_count), arch), geometry, bc)


def oracle_jets(sol, x):
    p, dp, d2p = sol.p(x), sol.dp(x), sol.d2p(x)
    return (Jet2(np.real(p), np.real(dp), np.real(d2p)),
            Jet2(np.imag(p), np.imag(dp), np.imag(d2p)))


class OracleField:
    """Adapter giving oracle objects the field interface used by the wrappers."""

    def __init__(self, sol, velocity=False):
        self.sol, self.velocity = sol, velocity

    def jets(self, x):
        if self.velocity:
            u, du = self.sol.u(x), self.sol.du(x)
            return [Jet2(u.real, du.real, 0 * x), Jet2(u.imag, du.imag, 0 * x)]
        return list(oracle_jets(self.sol, x))

    def gradient(self, x):
        return np.asarray(self.sol.dp(x), dtype=complex)


# ---- area profile and problem validation ----------------------------------------

def test_rectangular_profile_coefficients():
    a = AreaProfile.rectangular(0.01, 0.02, 0.03, 0.06, G)
    assert np.allclose((a.S0, a.S1, a.S2), (8e-4, 3.2e-3, 3.2e-3), rtol=1e-14)
    x = np.linspace(0, 1, 11)
    assert np.allclose(a.area(x), 4 * (0.01 + 0.02 * x) * (0.02 + 0.04 * x), rtol=1e-14)
    assert np.allclose(a.slope(x), 3.2e-3 + 6.4e-3 * x, rtol=1e-14)


def test_problem_field_requirements():
    with pytest.raises(ConfigurationError):
        DuctProblem("uniform", 500.0, radius=1e-3)
    with pytest.raises(ConfigurationError):
        DuctProblem("narrow", 500.0)
    with pytest.raises(ConfigurationError):
        DuctProblem("meanflow", 500.0, mach=1.0)
    with pytest.raises(ConfigurationError):
        DuctProblem("horn", 500.0)
    with pytest.raises(ConfigurationError):
        DuctProblem("uniform", -5.0)
    with pytest.raises(DomainError):
        DuctProblem("webster", 500.0, area=AreaProfile(0.1, -0.2))
    assert DuctProblem("narrow", 500.0, radius=5e-4).outputs == 2
    assert DuctProblem("uniform", 500.0).k == 2 * math.pi * 500.0 / 340.0


# ---- residual examples -------------------------------------------------------------

def test_helmholtz_linear_interpolant():
    f = zero_field()
    assert residual_helmholtz(f, 1.0, np.array([0.5]))[0] == 0.0
    assert residual_helmholtz(f, 1.0, np.array([0.25]))[0] == 0.5


def test_zero_bcs_zero_network_vanish():
    f = zero_field(2, BoundaryConditions(0.0, 0.0))
    x = np.linspace(0, 1, 5)
    assert not np.any(residual_helmholtz(zero_field(1, BoundaryConditions(0, 0)), 7.0, x))
    assert all(not np.any(r) for r in residual_narrow(f, None, 3 - 1j, x))
    assert all(not np.any(r) for r in residual_meanflow(f, None, 9.0, 0.3, x))


def test_webster_hand_example():
    r = residual_webster(zero_field(), AreaProfile(1.0, 1.0), 0.0, np.array([0.0]))
    assert r[0] == -2.0


def test_webster_domain_error():
    with pytest.raises(DomainError):
        webster(Jet2.identity(np.array([0.5])), AreaProfile(-1.0, 0.0), 1.0, np.array([0.5]))


def test_meanflow_rejects_supersonic():
    j = Jet2.identity(np.array([0.5]))
    with pytest.raises(ConfigurationError):
        meanflow(j, j, 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        momentum(j, j, 0.0, 0.0, 1.0, 1.2, 1.0)


# ---- oracle fields satisfy the residuals -----------------------------------------------

@pytest.mark.parametrize("f", [100.0, 500.0, 2000.0])
def test_uniform_oracle_residual(f):
    k = AIR.wavenumber(f)
    sol = uniform_analytic(G, BC, k)
    pR, _ = oracle_jets(sol, X64)
    assert np.max(np.abs(helmholtz(pR, k))) < 1e-9


def test_narrow_oracle_residual():
    p = DuctProblem("narrow", 500.0, radius=5e-4)
    s = p.visco_thermal()
    sol = narrow_analytic(G, BC, s)
    rR, rI = residual_narrow(OracleField(sol), None, s.k_w, X64)
    assert max(np.max(np.abs(rR)), np.max(np.abs(rI))) < 1e-9


@pytest.mark.parametrize("M", [0.0, 0.2, 0.5])
def test_meanflow_oracle_residual(M):
    k = AIR.wavenumber(500.0)
    sol = meanflow_analytic(G, BC, k, M, AIR.impedance)
    rR, rI = residual_meanflow(OracleField(sol), None, k, M, X64)
    assert max(np.max(np.abs(rR)), np.max(np.abs(rI))) < 1e-9


@pytest.mark.parametrize("M", [0.0, 0.2])
def test_momentum_oracle_residual(M):
    k = AIR.wavenumber(500.0)
    rc = AIR.impedance
    sol = meanflow_analytic(G, BC, k, M, rc)
    rR, rI = residual_momentum(OracleField(sol, velocity=True), OracleField(sol), k, M, rc, X64)
    assert max(np.max(np.abs(rR)), np.max(np.abs(rI))) < 1e-9


def test_momentum_no_flow_uniform_oracle():
    k = AIR.wavenumber(500.0)
    rc = AIR.impedance
    sol = uniform_analytic(G, BC, k, rc)
    rR, rI = residual_momentum(OracleField(sol, velocity=True), OracleField(sol), k, 0.0, rc, X64)
    assert max(np.max(np.abs(rR)), np.max(np.abs(rI))) < 1e-9
    # with M = 0 the real part is -k u_I + p_R'/(rho c)
    u, dp = sol.u(X64), sol.dp(X64)
    assert np.allclose(rR, -k * u.imag + dp.real / rc, rtol=0, atol=1e-15)


def test_momentum_zero_inputs():
    z = Jet2(np.zeros(3), np.zeros(3), np.zeros(3))
    rR, rI = momentum(z, z, np.zeros(3), np.zeros(3), 5.0, 0.2, 400.0)
    assert not np.any(rR) and not np.any(rI)


def test_webster_oracle_residual():
    area = AreaProfile.rectangular(0.01, 0.02, 0.03, 0.06, G)
    k = AIR.wavenumber(500.0)
    sol = webster_bvp(G, BC, area, k, 4096)
    pR, _ = oracle_jets(sol, X64)
    # relative to the k^2 p scale of the equation (|p| ~ 8 here)
    assert np.max(np.abs(webster(pR, area, k, X64))) < 1e-4


# ---- reduction identities ---------------------------------------------------------------

def _random_jets(n=50):
    r = np.random.default_rng(5)
    return [Jet2(*r.normal(size=(3, n))) for _ in range(2)]


def test_webster_reduces_to_helmholtz():
    p, _ = _random_jets()
    x = np.linspace(0, 1, 50)
    assert np.max(np.abs(webster(p, AreaProfile(2.5), 9.2, x) - helmholtz(p, 9.2))) < 1e-12


def test_narrow_reduces_to_helmholtz():
    pR, pI = _random_jets()
    rR, rI = narrow(pR, pI, 9.2 + 0j, )
    assert np.max(np.abs(rR - helmholtz(pR, 9.2))) < 1e-12
    assert np.max(np.abs(rI - helmholtz(pI, 9.2))) < 1e-12


def test_meanflow_reduces_to_helmholtz():
    pR, pI = _random_jets()
    rR, rI = meanflow(pR, pI, 9.2, 0.0)
    assert np.max(np.abs(rR - helmholtz(pR, 9.2))) < 1e-12
    assert np.max(np.abs(rI - helmholtz(pI, 9.2))) < 1e-12


# ---- losses -----------------------------------------------------------------------------

def test_loss_examples():
    assert loss_mean_square(ResidualBatch([0.1, 0.2], [np.zeros(2)])) == 0.0
    assert loss_mean_square(ResidualBatch([0.1, 0.2], [np.array([1.0, -1.0])])) == 1.0
    r = RNG.normal(size=20)
    pts = np.linspace(0, 1, 20)
    assert loss_mean_square(ResidualBatch(pts, [2 * r])) == 4 * loss_mean_square(ResidualBatch(pts, [r]))
    two = loss_mean_square(ResidualBatch(pts, [r, 3 * r]))
    assert two == pytest.approx(10 * np.mean(r * r), rel=1e-15)


def test_loss_permutation_invariant_bitwise():
    pts = RNG.uniform(size=200)
    r = RNG.normal(size=200) * 1e3
    perm = RNG.permutation(200)
    a = loss_mean_square(ResidualBatch(pts, [r]))
    b = loss_mean_square(ResidualBatch(pts[perm], [r[perm]]))
    assert a == b


def test_loss_empty_batch():
    with pytest.raises(ConfigurationError):
        loss_mean_square(ResidualBatch([], [np.zeros(0)]))
    with pytest.raises(ConfigurationError):
        mean_square([])
    with pytest.raises(ConfigurationError):
        ResidualBatch([0.1, 0.2], [np.zeros(3)])


# ---- exact parameter gradients for every residual ----------------------------------------

PROBLEMS = [
    DuctProblem("uniform", 500.0),
    DuctProblem("webster", 500.0, area=AreaProfile.rectangular(0.01, 0.02, 0.03, 0.06, G)),
    DuctProblem("narrow", 500.0, bc=BoundaryConditions(1 + 0.5j, -1), radius=5e-4),
    DuctProblem("meanflow", 500.0, mach=0.2),
]


@pytest.mark.parametrize("problem", PROBLEMS, ids=lambda p: p.kind)
def test_residual_gradients_match_fd(problem):
    arch = Architecture.mlp(2, 4, problem.outputs)
    theta = flatten(init_params(arch, 1))
    x = np.linspace(0.05, 0.95, 7)

    def loss(t):
        jets = trial_parts(problem.geometry, problem.bc, jet_outputs(arch, t, x), x)
        return mean_square(pressure_residuals(problem, jets, x))

    assert fd_check(loss, theta, h=1e-5) < 1e-5


def test_momentum_gradient_matches_fd():
    arch = Architecture.mlp(2, 4, 2)
    theta = flatten(init_params(arch, 4))
    x = np.linspace(0.05, 0.95, 7)
    dpR, dpI = np.cos(x), np.sin(2 * x)

    def loss(t):
        uR, uI = jet_outputs(arch, t, x)
        return mean_square(list(momentum(uR, uI, dpR, dpI, 9.2, 0.2, 1.0)))

    assert fd_check(loss, theta, h=1e-5) < 1e-5


def test_lagrange_gradient_matches_fd():
    problem = PROBLEMS[0]
    arch = Architecture.mlp(2, 4, 1)
    theta = flatten(init_params(arch, 4))
    x = np.linspace(0.05, 0.95, 7)
    assert fd_check(lambda t: lagrange_loss(t, arch, problem, (1.0, 2.0), x).total, theta, h=1e-5) < 1e-5


# ---- multiplier baseline ------------------------------------------------------------------

def _exact_sine_net(problem):
    # one sine neuron reproduces C1 cos kx + C2 sin kx = A sin(kx + phi)
    sol = uniform_analytic(problem.geometry, problem.bc, problem.k)
    A, phi = math.hypot(sol.C1, sol.C2), math.atan2(sol.C1, sol.C2)
    arch = Architecture((1, 1, 1), "sin")
    net = NetworkParams(arch, [(np.array([[problem.k]]), np.array([phi])),
                               (np.array([[A]]), np.zeros(1))])
    return arch, flatten(net)


def test_lagrange_exact_net_has_zero_losses():
    problem = DuctProblem("uniform", 500.0)
    arch, theta = _exact_sine_net(problem)
    terms = lagrange_loss(theta, arch, problem, (1.0, 1.0), X64)
    assert terms.L_d < 1e-10 and terms.L_b < 1e-10


def test_lagrange_zero_lambda_and_zero_net():
    problem = DuctProblem("uniform", 500.0)
    arch = Architecture.mlp(2, 4, 1)
    theta = flatten(init_params(arch, 0))
    terms = lagrange_loss(theta, arch, problem, (0.0, 0.0), X64)
    assert terms.total == terms.L_d
    zero = lagrange_loss(np.zeros(arch.param_count), arch, problem, (1.0, 1.0), X64)
    assert zero.L_b == 1.0 and zero.L_d == 0.0 and zero.total == 1.0
    assert sum(zero.boundary_terms) == zero.L_b


def test_lagrange_rejects_two_part_problems():
    arch = Architecture.mlp(1, 3, 1)
    with pytest.raises(ConfigurationError):
        lagrange_loss(np.zeros(arch.param_count), arch, PROBLEMS[3], (1, 1), X64)


def test_lambda_update_examples():
    assert lambda_update(2.0, 4.0, 1.0) == 2.0
    assert lambda_update(2.0, 4.0, 0.0) == 4.0
    assert lambda_update(2.0, 4.0, 0.5) == 3.0
    with pytest.raises(ConfigurationError):
        lambda_update(1.0, 1.0, 1.5)
    with pytest.raises(NumericalFailure):
        lambda_update(1.0, lambda_hat(np.ones(3), np.zeros(3)), 0.5)


def test_lambda_hat_statistic():
    assert lambda_hat(np.array([1.0, -4.0]), np.array([1.0, -3.0])) == 2.0
