"""Kernel recursion tests.

Reference values are frozen from independent computations: adaptive
Gauss-Kronrod integration (scipy.integrate.quad) of the one-dimensional
recursion, the arcsine closed form for the erf cross kernel, and the
arccos closed form for the relu cross kernel.  The module's own
Gauss-Hermite values must reproduce them.
"""

import numpy as np
import pytest
from scipy import integrate, special

from nngplab.distributions import RandomStream
from nngplab.errors import ConfigError, DegenerateKernelError
from nngplab.kernel import (
    DEFAULT_ORDER,
    KernelSequence,
    QuadratureRule,
    default_rule,
    kernel_cross_sequence,
    kernel_diag_sequence,
    kernel_mc_oracle,
    limit_gaussian_sampler,
    limit_variance,
)
from nngplab.network import NetworkConfig

SMOOTH_BOUNDED = ("sigmoid", "tanh", "arctan", "erf")
SETTINGS = ((1.0, 0.0), (2.0, 0.1), (1.0, 1.0))

_ACT_FN = {
    "sigmoid": special.expit,
    "tanh": np.tanh,
    "arctan": np.arctan,
    "erf": special.erf,
}


def make_config(activation="sigmoid", c_w=1.0, c_b=0.0, depth=3) -> NetworkConfig:
    widths = (4,) + (16,) * depth + (1,)
    return NetworkConfig(depth=depth, widths=widths, c_w=c_w, c_b=c_b,
                         activation=activation, hidden_law="gaussian")


def independent_diag(activation: str, c_w: float, c_b: float, layers: int) -> list[float]:
    """Reference recursion via adaptive quadrature, independent of the module."""
    fn = _ACT_FN[activation]
    phi = lambda u: np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
    k = c_b + c_w  # x = ones, |x|^2 / n_0 = 1
    out = [k]
    for _ in range(layers - 1):
        m, _ = integrate.quad(lambda u: fn(np.sqrt(k) * u) ** 2 * phi(u),
                              -12.0, 12.0, epsabs=1e-14, epsrel=1e-13, limit=200)
        k = c_b + c_w * m
        out.append(k)
    return out


class TestQuadratureRule:
    def test_weights_normalized(self):
        for order in (8, 64, DEFAULT_ORDER):
            rule = QuadratureRule.gauss_hermite(order)
            assert float(rule.weights.sum()) == pytest.approx(1.0, abs=1e-14)
            assert np.all(rule.weights > 0.0)

    def test_polynomial_exactness(self):
        # Exact Gaussian moments: E[u^2] = 1, E[u^4] = 3, E[u^6] = 15.
        rule = QuadratureRule.gauss_hermite(8)
        for power, moment in ((2, 1.0), (4, 3.0), (6, 15.0)):
            val = float(rule.weights @ rule.nodes**power)
            assert val == pytest.approx(moment, rel=1e-13)

    def test_order_validated(self):
        with pytest.raises(ConfigError, match="order"):
            QuadratureRule.gauss_hermite(0)


class TestDiagSequence:
    def test_base_case(self):
        # c_b = 0.1, C_W = 2, x.y/n_0 = 1 -> K^(1) = 2.1.
        seq = kernel_diag_sequence(make_config(c_w=2.0, c_b=0.1), "ones")
        assert seq.diag[0] == pytest.approx(2.1, rel=1e-15)

    def test_identity_recursion_exact(self):
        cfg = make_config("identity", c_w=2.0, c_b=0.1)
        seq = kernel_diag_sequence(cfg, "ones")
        k = 2.1
        for value in seq.diag[1:]:
            k = 0.1 + 2.0 * k
            assert value == pytest.approx(k, rel=1e-12)

    def test_sigmoid_second_layer_frozen(self):
        # Independent adaptive-quadrature value for sigma = sigmoid,
        # c_b = 0, C_W = 1, K^(1) = 1.
        seq = kernel_diag_sequence(make_config(), "ones")
        assert seq.diag[1] == pytest.approx(0.293379035858093, rel=1e-12)

    @pytest.mark.parametrize("activation", SMOOTH_BOUNDED)
    @pytest.mark.parametrize("c_w,c_b", SETTINGS)
    def test_matches_independent_recursion(self, activation, c_w, c_b):
        cfg = make_config(activation, c_w=c_w, c_b=c_b)
        mine = kernel_diag_sequence(cfg, "ones").diag
        ref = independent_diag(activation, c_w, c_b, cfg.depth + 1)
        for a, b in zip(mine, ref):
            assert a == pytest.approx(b, rel=5e-9)

    def test_bounded_activation_envelope(self):
        # c_b <= K^(l) <= c_b + C_W ||sigma||_inf^2 for l >= 2.
        for activation in SMOOTH_BOUNDED:
            for c_w, c_b in SETTINGS:
                cfg = make_config(activation, c_w=c_w, c_b=c_b)
                sup = {"sigmoid": 1.0, "tanh": 1.0, "arctan": np.pi / 2, "erf": 1.0}[activation]
                for k in kernel_diag_sequence(cfg, "ones").diag[1:]:
                    assert c_b <= k <= c_b + c_w * sup * sup + 1e-12

    def test_constant_zero_collapses_to_cb(self):
        cfg = make_config("constant_zero", c_b=0.7)
        seq = kernel_diag_sequence(cfg, "ones")
        assert seq.diag[1:] == (0.7, 0.7, 0.7)

    def test_degenerate_kernel_distinct_error(self):
        cfg = make_config(c_b=0.0)
        with pytest.raises(DegenerateKernelError):
            kernel_diag_sequence(cfg, np.zeros(4))
        # Degenerate base is fine for a constant activation.
        kernel_diag_sequence(make_config("constant_zero", c_b=0.0), np.zeros(4))

    def test_order_doubling_stability(self):
        # Doubling the default order moves every K^(l) by < 1e-10 for the
        # bounded smooth activations at the default configuration.
        for activation in SMOOTH_BOUNDED:
            cfg = make_config(activation)
            a = kernel_diag_sequence(cfg, "ones", default_rule(DEFAULT_ORDER)).diag
            b = kernel_diag_sequence(cfg, "ones", default_rule(2 * DEFAULT_ORDER)).diag
            assert max(abs(x - y) for x, y in zip(a, b)) < 1e-10

    def test_order_cauchy_sequence(self):
        # Successive order-doubling differences decrease: 32 -> 64 -> 128.
        for activation in SMOOTH_BOUNDED:
            cfg = make_config(activation)
            seqs = {
                o: kernel_diag_sequence(cfg, "ones", default_rule(o)).diag
                for o in (32, 64, 128)
            }
            d1 = max(abs(x - y) for x, y in zip(seqs[32], seqs[64]))
            d2 = max(abs(x - y) for x, y in zip(seqs[64], seqs[128]))
            assert d2 <= d1 + 1e-14


class TestCrossSequence:
    def test_x_equals_y_matches_diag(self):
        cfg = make_config()
        cross = kernel_cross_sequence(cfg, "ones", "ones")
        diag = kernel_diag_sequence(cfg, "ones")
        assert cross.cross == pytest.approx(diag.diag, rel=1e-12)
        assert cross.cross_diag_y == diag.diag

    def test_orthogonal_inputs_base(self):
        # x.y = 0 and c_b = 0 -> K^(1)(x,y) = 0.
        cfg = make_config()
        x = np.array([1.0, 1.0, 0.0, 0.0])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        seq = kernel_cross_sequence(cfg, x, y)
        assert seq.cross[0] == 0.0

    def test_cauchy_schwarz_every_layer(self):
        cfg = make_config()
        rng = np.random.default_rng(5)
        for _ in range(10):
            x = rng.normal(size=4)
            y = rng.normal(size=4)
            if float(x @ x) < 0.1 or float(y @ y) < 0.1:
                continue
            seq = kernel_cross_sequence(cfg, x, y)
            for kxx, kxy, kyy in zip(seq.diag, seq.cross, seq.cross_diag_y):
                assert abs(kxy) <= np.sqrt(kxx * kyy) + 1e-12

    def test_erf_cross_closed_form(self):
        # E[erf(a) erf(b)] = (2/pi) arcsin(2 K_xy / sqrt((1+2K_xx)(1+2K_yy))).
        cfg = make_config("erf", depth=1)
        x = np.array([1.0, 1.0, 1.0, 1.0])
        y = np.array([1.0, 1.0, 1.0, -1.0])  # K1: xx = 1, xy = 0.5, yy = 1
        seq = kernel_cross_sequence(cfg, x, y)
        assert seq.cross[0] == pytest.approx(0.5)
        closed = 2.0 / np.pi * np.arcsin(2.0 * 0.5 / np.sqrt(3.0 * 3.0))
        assert seq.cross[1] == pytest.approx(closed, rel=1e-12)

    def test_sigmoid_cross_frozen(self):
        # Independent dblquad value for K_xx = K_yy = 1, K_xy = 0.5.
        cfg = make_config("sigmoid", depth=1)
        x = np.array([1.0, 1.0, 1.0, 1.0])
        y = np.array([1.0, 1.0, 1.0, -1.0])
        seq = kernel_cross_sequence(cfg, x, y)
        assert seq.cross[1] == pytest.approx(0.2714283256317053, rel=1e-11)

    def test_perfectly_correlated_fallback(self):
        # x = 2y gives correlation exactly 1 at the base layer; the closed
        # one-dimensional form must agree with the diag recursion bound.
        cfg = make_config()
        y = np.ones(4)
        seq = kernel_cross_sequence(cfg, 2.0 * y, y)
        for kxx, kxy, kyy in zip(seq.diag, seq.cross, seq.cross_diag_y):
            assert abs(kxy) <= np.sqrt(kxx * kyy) + 1e-12

    def test_relu_cross_arccos_formula(self):
        # E[relu(a) relu(b)] = (sqrt(Kxx Kyy)/2pi)(sin t + (pi - t) cos t),
        # cos t = rho.  Piecewise-smooth integrand: looser tolerance.
        cfg = make_config("relu", depth=1)
        rho = 0.5
        x = np.array([1.0, 1.0, 1.0, 1.0])
        y = np.array([1.0, 1.0, 1.0, -1.0])
        seq = kernel_cross_sequence(cfg, x, y)
        theta = np.arccos(rho)
        closed = (1.0 / (2.0 * np.pi)) * (np.sin(theta) + (np.pi - theta) * np.cos(theta))
        assert seq.cross[1] == pytest.approx(closed, abs=5e-4)

    def test_relu_diag_half_kernel(self):
        # E[relu(sqrt(K) u)^2] = K/2 exactly; even-order rules hit it by parity.
        cfg = make_config("relu", depth=1, c_w=2.0)
        seq = kernel_diag_sequence(cfg, "ones")
        assert seq.diag[1] == pytest.approx(2.0 * (2.0 / 2.0), rel=1e-12)


class TestMcOracle:
    def test_constant_zero_exact(self):
        est, err = kernel_mc_oracle(make_config("constant_zero", c_b=0.4), "ones", 1000, 1)
        assert est[1:] == (0.4, 0.4, 0.4)
        assert err == (0.0, 0.0, 0.0, 0.0)

    def test_identity_within_errors(self):
        cfg = make_config("identity", c_w=1.0, c_b=0.5)
        est, err = kernel_mc_oracle(cfg, "ones", 200_000, 3)
        ref = kernel_diag_sequence(cfg, "ones").diag
        for e, s, r in zip(est[1:], err[1:], ref[1:]):
            assert abs(e - r) <= 4.0 * s

    def test_sigmoid_agrees_with_quadrature(self):
        cfg = make_config()
        est, err = kernel_mc_oracle(cfg, "ones", 1_000_000, 42)
        ref = kernel_diag_sequence(cfg, "ones").diag
        for e, s, r in zip(est[1:], err[1:], ref[1:]):
            assert s > 0.0
            assert abs(e - r) <= 4.0 * s

    def test_sample_count_validated(self):
        with pytest.raises(ConfigError, match="sample_count"):
            kernel_mc_oracle(make_config(), "ones", 99, 0)

    def test_reproducible(self):
        a = kernel_mc_oracle(make_config(), "ones", 10_000, 7)
        b = kernel_mc_oracle(make_config(), "ones", 10_000, 7)
        assert a == b


class TestLimitSampler:
    def test_reproducible_and_scaled(self):
        a = limit_gaussian_sampler(2.0, 1, 100_000, 7)
        b = limit_gaussian_sampler(2.0, 1, 100_000, 7)
        assert np.array_equal(a.values, b.values)
        assert float(a.values.var()) == pytest.approx(2.0, rel=0.03)

    def test_ks_against_standard_normal(self):
        from scipy import stats

        batch = limit_gaussian_sampler(1.0, 1, 100_000, 11)
        stat = stats.kstest(batch.values[:, 0], stats.norm.cdf).statistic
        assert stat < 1.63 / np.sqrt(100_000)  # 1% critical value

    def test_dim_shape(self):
        batch = limit_gaussian_sampler(1.0, 3, 50, 0)
        assert batch.values.shape == (50, 3)

    def test_rejections(self):
        with pytest.raises(ConfigError, match="variance"):
            limit_gaussian_sampler(0.0, 1, 10, 0)
        with pytest.raises(ConfigError, match="count"):
            limit_gaussian_sampler(1.0, 1, 0, 0)
        with pytest.raises(ConfigError, match="dim"):
            limit_gaussian_sampler(1.0, 0, 10, 0)


class TestKernelSequence:
    def test_records_layout(self):
        seq = KernelSequence(diag=(1.0, 0.5), cross=(0.2, 0.1), cross_diag_y=(1.0, 0.4))
        recs = seq.records()
        assert recs[0] == {"layer": 1, "k_xx": 1.0, "k_xy": 0.2, "k_yy": 1.0}
        assert recs[1]["layer"] == 2

    def test_psd_two_by_two(self):
        cfg = make_config()
        x = np.array([1.0, 0.5, -0.25, 2.0])
        y = np.array([-1.0, 1.5, 0.5, 0.5])
        seq = kernel_cross_sequence(cfg, x, y)
        for kxx, kxy, kyy in zip(seq.diag, seq.cross, seq.cross_diag_y):
            m = np.array([[kxx, kxy], [kxy, kyy]])
            assert np.linalg.eigvalsh(m).min() >= -1e-12

    def test_limit_variance_helper(self):
        cfg = make_config()
        assert limit_variance(cfg, "ones") == kernel_diag_sequence(cfg, "ones").diag[-1]
