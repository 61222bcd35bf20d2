import math

import numpy as np
import pytest
from scipy import constants as const

from ionsim import crystal, gaussian
from ionsim.modes import NormalModes, chain_taylor, normal_modes


def test_single_oscillator_saturates():
    cov = gaussian.ground_state_covariance(NormalModes(np.array([2.5]), np.eye(1)))
    assert cov.X[0, 0] * cov.P[0, 0] == pytest.approx(0.25, rel=1e-14)
    assert gaussian.single_site_entropy(cov, 0) == 0.0


def test_two_ion_covariance_oracle(ctx):
    # modes (1,-1)/sqrt2 at sqrt(r^2-1) and (1,1)/sqrt2 at r
    rx = 2.0
    cov = gaussian.ground_state_covariance(normal_modes(chain_taylor(2, rx)), ctx)
    w1, w2 = math.sqrt(rx**2 - 1) * ctx.omega_z, rx * ctx.omega_z
    x = const.hbar / (2 * ctx.mass)
    assert cov.X[0, 0] == pytest.approx(0.5 * x * (1 / w1 + 1 / w2), rel=1e-12)
    assert cov.X[0, 1] == pytest.approx(0.5 * x * (1 / w2 - 1 / w1), rel=1e-12)
    assert cov.P[0, 0] == pytest.approx(0.5 * const.hbar * ctx.mass / 2 * (w1 + w2), rel=1e-12)
    nu = math.sqrt(cov.X[0, 0] * cov.P[0, 0]) / const.hbar
    assert gaussian.single_site_entropy(cov, 0) == pytest.approx(gaussian.entropy_from_nu(nu), rel=1e-12)


def test_covariance_positive_definite_and_heisenberg():
    cov = gaussian.ground_state_covariance(normal_modes(chain_taylor(6, 4.0)))
    assert np.all(np.linalg.eigvalsh(cov.X) > 0) and np.all(np.linalg.eigvalsh(cov.P) > 0)
    assert np.allclose(cov.X, cov.X.T) and np.allclose(cov.P, cov.P.T)
    assert np.all(np.sqrt(np.diag(cov.X) * np.diag(cov.P)) >= 0.5 - 1e-12)
    assert np.all(cov.cross == 0)


def test_unstable_mode_rejected():
    with pytest.raises(ValueError):
        gaussian.ground_state_covariance(normal_modes(chain_taylor(3, 1.4)))


def test_fluctuations_diverge_near_critical():
    rc = crystal.critical_frequency(3)
    vals = [np.trace(gaussian.ground_state_covariance(normal_modes(chain_taylor(3, math.sqrt(rc**2 + d)))).X @ np.eye(3)) for d in (1e-2, 1e-4, 1e-6)]
    assert vals[0] < vals[1] < vals[2] and vals[2] > 50 * vals[0]


def test_zero_amplitude_site_stays_finite():
    B = np.array([[1, 1, 0], [-1, 1, 0], [0, 0, math.sqrt(2)]]) / math.sqrt(2)
    xs = [gaussian.ground_state_covariance(NormalModes(np.array([w, 1.0, 2.0]), B)).X for w in (1e-2, 1e-6, 1e-10)]
    assert xs[-1][2, 2] == pytest.approx(xs[0][2, 2])
    assert xs[-1][0, 0] > 100 * xs[0][0, 0]


def test_entropy_limits():
    assert gaussian.entropy_from_nu(0.5) == 0.0
    assert gaussian.entropy_from_nu(1.5) == pytest.approx(2.0)
    with pytest.raises(gaussian.InvariantViolation):
        gaussian.entropy_from_nu(0.49)
    S = [gaussian.chain_entropies(2, r)[0] for r in (2.0, 10.0, 100.0)]
    assert S[0] > S[1] > S[2] and S[2] < 1e-3


def test_symplectic_scaling_invariance():
    cov = gaussian.ground_state_covariance(normal_modes(chain_taylor(3, 1.7)))
    lam = 3.7
    scaled = gaussian.CovarianceData(cov.X * lam**2, cov.P / lam**2, cov.cross, cov.hbar)
    for s in range(3):
        assert gaussian.single_site_entropy(scaled, s) == pytest.approx(gaussian.single_site_entropy(cov, s), rel=1e-12)


def test_closed_forms_diverge_and_error():
    assert gaussian.closed_form_S2(1 + 1e-8) > gaussian.closed_form_S2(1 + 1e-4)
    with pytest.raises(ValueError):
        gaussian.closed_form_S2(1.0)
    with pytest.raises(ValueError):
        gaussian.closed_form_S3(1.5)


def test_closed_form_slope():
    d = np.array([1e-6, 1e-4])
    S = [gaussian.closed_form_S3(math.sqrt(12 / 5 + x)) for x in d]
    assert (S[1] - S[0]) / (math.log2(d[1]) - math.log2(d[0])) == pytest.approx(-0.25, rel=1e-8)


@pytest.mark.parametrize("N", [2, 3])
def test_closed_form_offset_constant(N):
    # numeric minus closed form is an additive constant (log-base conversion)
    off = gaussian.closed_form_offsets(N, np.geomspace(1e-6, 1e-4, 9))
    assert np.abs(off - off.mean()).max() < 0.05
    assert np.ptp(off) < 0.02


def test_soft_site():
    assert gaussian.soft_site(2) == 0
    assert gaussian.soft_site(3) == 1


def test_sqrt_corrected_slope():
    # with the leading sqrt(d) correction removed the slope is -1/4 for every N
    for N in (2, 3, 5, 10):
        fit = gaussian.fit_log_slope(N, correct_sqrt=True)
        assert fit.slope == pytest.approx(-0.25, abs=0.002)


def test_scan_csv(tmp_path):
    gaussian.entropy_scan_csv(3, [1.6, 1.7, 2.0], tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "r_x_over_omega_z,S_bits_site0,S_bits_site1,S_bits_site2"
    with pytest.raises(ValueError):
        gaussian.entropy_scan_csv(3, [2.0, 1.6], tmp_path / "t.csv")
