import numpy as np
import pytest

from ddofdm.channel import OfdmConfig
from ddofdm.crlb import PathTheta, crlb_closed_form, crlb_numerical, fisher_matrix, signal, signal_partials
from ddofdm.errors import InvalidArgumentError, SingularMatrixError

CONFIGS = [OfdmConfig(), OfdmConfig(N=128), OfdmConfig(d_t=2, d_f=2), OfdmConfig(M=32, N=64, d_t=4, d_f=2)]


def finite_difference_partials(theta, cfg, rel=1e-6):
    names = ("habs", "phi", "k", "l")
    base = [theta.habs, theta.phi, theta.k, theta.l]
    out = []
    for i in range(4):
        h = rel * max(1.0, abs(base[i]))
        up, dn = list(base), list(base)
        up[i] += h
        dn[i] -= h
        out.append((signal(PathTheta(*up), cfg) - signal(PathTheta(*dn), cfg)) / (2 * h))
    return np.stack(out), names


class TestClosedForm:
    @pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: f"N{c.N}M{c.M}dt{c.d_t}df{c.d_f}")
    def test_equals_inverse_fisher(self, cfg):
        theta = PathTheta(0.6, 0.4, 2.0, 1.0)
        closed = crlb_closed_form(0.6, cfg, 0.05)
        num = crlb_numerical(theta, cfg, 0.05)
        for a, b in [(closed.crlb_habs, num.crlb_habs), (closed.crlb_phi, num.crlb_phi),
                     (closed.crlb_k, num.crlb_k), (closed.crlb_l, num.crlb_l)]:
            np.testing.assert_allclose(a, b, rtol=1e-6)

    def test_scaling(self):
        cfg = OfdmConfig()
        a = crlb_closed_form(1.0, cfg, 0.1)
        b = crlb_closed_form(0.5, cfg, 0.2)
        np.testing.assert_allclose(b.crlb_k, 8 * a.crlb_k)
        np.testing.assert_allclose(b.crlb_habs, 2 * a.crlb_habs)

    def test_longer_frames_tighten_doppler_bound(self):
        assert crlb_closed_form(1.0, OfdmConfig(N=128), 0.1).crlb_k[0] < crlb_closed_form(1.0, OfdmConfig(), 0.1).crlb_k[0]

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            crlb_closed_form(0.0, OfdmConfig(), 0.1)
        with pytest.raises(InvalidArgumentError):
            crlb_closed_form(1.0, OfdmConfig(N=4, d_t=4), 0.1)


class TestFisher:
    @pytest.mark.parametrize("theta", [PathTheta(0.6, 0.4, 2.0, 1.0), PathTheta(1.3, -2.0, -1.37, 3.0), PathTheta(0.2, 3.0, 0.45, 0.0)])
    def test_partials_match_finite_differences(self, theta):
        cfg = OfdmConfig()
        fd, names = finite_difference_partials(theta, cfg)
        an = signal_partials(theta, cfg)
        for i, name in enumerate(names):
            err = np.linalg.norm(an[i] - fd[i]) / np.linalg.norm(an[i])
            assert err < 1e-5, name

    def test_symmetric_positive_definite(self):
        cfg = OfdmConfig()
        J = fisher_matrix([PathTheta(1.0, 0.1, 1.2, 0.0), PathTheta(0.5, -1.0, -2.6, 3.0)], cfg, 0.1)
        assert J.shape == (8, 8)
        np.testing.assert_allclose(J, J.T, atol=1e-10)
        assert np.all(np.linalg.eigvalsh(J) > 0)

    def test_separated_paths_decouple(self):
        cfg = OfdmConfig()
        a, b = PathTheta(1.0, 0.1, 1.0, 0.0), PathTheta(0.5, -1.0, -3.0, 3.0)
        both = crlb_numerical([a, b], cfg, 0.1)
        alone = crlb_numerical(a, cfg, 0.1)
        assert np.isclose(both.crlb_k[0], alone.crlb_k[0], rtol=1e-9)

    def test_coincident_paths_are_singular(self):
        cfg = OfdmConfig()
        p = PathTheta(1.0, 0.0, 1.0, 1.0)
        with pytest.raises(SingularMatrixError):
            crlb_numerical([p, p], cfg, 0.1)

    def test_noise_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            fisher_matrix(PathTheta(1, 0, 0, 0), OfdmConfig(), 0.0)
