import numpy as np
import pytest

from vssd.tensor import Rng, Tensor, UnsupportedConfigError, grad_check
from vssd.kernels.reference import (
    ContinuousParams,
    ParameterDomainError,
    SsdSequenceInputs,
    apply_matrix_form,
    bi_ssd,
    build_mask_M,
    discretize_zoh,
    lti_conv_apply,
    lti_conv_kernel,
    ssd_matrix_form,
    ssd_quadratic,
    ssd_recurrent,
)


def random_inputs(seed, L=12, Hd=2, P=4, N=6):
    rng = Rng(seed)
    return SsdSequenceInputs(
        rng.normal((L, Hd, P)),
        rng.normal((L, N)),
        rng.normal((L, N)),
        0.05 + 0.9 * rng.uniform((L, Hd)),
    )


class TestDiscretization:
    def test_a_in_unit_interval(self):
        rng = Rng(0)
        p = ContinuousParams(-np.exp(rng.normal((3,))), rng.normal((10, 4)),
                             0.01 + rng.uniform((10, 3)))
        A, B = discretize_zoh(p)
        assert np.all(A > 0) and np.all(A < 1)
        assert B.shape == (10, 3, 4)

    def test_first_order_matches_exact_for_small_delta(self):
        p = ContinuousParams(np.array([-1.0]), np.ones((5, 2)), np.full((5, 1), 1e-5))
        _, B1 = discretize_zoh(p, exact=False)
        _, B2 = discretize_zoh(p, exact=True)
        assert np.max(np.abs(B1 - B2)) < 1e-9

    def test_domain_errors(self):
        with pytest.raises(ParameterDomainError):
            ContinuousParams(np.array([1.0]), np.ones((2, 2)), np.ones((2, 1)))
        with pytest.raises(ParameterDomainError):
            ContinuousParams(np.array([-1.0]), np.ones((2, 2)), np.zeros((2, 1)))

    def test_a_domain_checked(self):
        with pytest.raises(ParameterDomainError):
            SsdSequenceInputs(np.ones((2, 1, 1)), np.ones((2, 2)), np.ones((2, 2)),
                              np.full((2, 1), 1.5))


class TestCausalEquivalence:
    @pytest.mark.parametrize("seed", range(5))
    def test_three_forms_agree(self, seed):
        inp = random_inputs(seed)
        y_rec = ssd_recurrent(inp).data
        y_quad = ssd_quadratic(inp).data
        y_mat = apply_matrix_form(ssd_matrix_form(inp), inp.X)
        assert np.max(np.abs(y_rec - y_quad)) < 1e-12
        assert np.max(np.abs(y_rec - y_mat)) < 1e-12

    def test_length_one(self):
        inp = random_inputs(3, L=1)
        y = ssd_recurrent(inp).data
        ref = np.einsum("n,hnp->hp", inp.C.data[0],
                        np.einsum("n,hp->hnp", inp.B.data[0], inp.X.data[0]))
        assert np.allclose(y[0], ref, atol=1e-14)

    def test_first_token_oracle(self):
        # h(0) has no history: y(0) = C_0 (B_0 (x) x_0) regardless of A
        inp = random_inputs(4)
        y = ssd_recurrent(inp).data
        ref = (inp.C.data[0] @ inp.B.data[0]) * inp.X.data[0]
        assert np.allclose(y[0], ref, atol=1e-13)


class TestMask:
    def test_structure(self):
        A = 0.05 + 0.9 * Rng(5).uniform((8, 3))
        M = build_mask_M(Tensor(A))
        idx = np.arange(8)
        assert np.array_equal(M[:, idx, idx], np.ones((3, 8)))
        assert np.all(M[:, np.triu(np.ones((8, 8), bool), 1)] == 0.0)

    def test_against_explicit_products(self):
        A = 0.05 + 0.9 * Rng(6).uniform((6, 2))
        M = build_mask_M(Tensor(A))
        for h in range(2):
            for j in range(6):
                for i in range(j + 1):
                    assert abs(M[h, j, i] - np.prod(A[i + 1 : j + 1, h])) < 1e-14


class TestLti:
    def test_kernel_values(self):
        K = lti_conv_kernel(0.5, [1.0, 2.0], [3.0, 4.0], 4)
        cb = 3.0 * 1.0 + 4.0 * 2.0
        assert np.allclose(K, [cb, cb * 0.5, cb * 0.25, cb * 0.125])

    def test_conv_equals_recurrence(self):
        rng = Rng(7)
        L, N = 100, 4
        a = 0.7
        B, C, x = rng.normal((N,)), rng.normal((N,)), rng.normal((L,))
        y_conv = lti_conv_apply(x, lti_conv_kernel(a, B, C, L))
        inp = SsdSequenceInputs(x.reshape(L, 1, 1), np.tile(B, (L, 1)),
                                np.tile(C, (L, 1)), np.full((L, 1), a))
        assert np.max(np.abs(y_conv - ssd_recurrent(inp).data.reshape(-1))) < 1e-12


class TestBiSsd:
    def test_even_width_required(self):
        with pytest.raises(UnsupportedConfigError):
            bi_ssd(random_inputs(8, P=3))

    def test_halves(self):
        inp = random_inputs(9, P=4)
        y = bi_ssd(inp).data
        fwd = ssd_recurrent(SsdSequenceInputs(inp.X[:, :, :2], inp.B, inp.C, inp.A)).data
        assert np.array_equal(y[:, :, :2], fwd)
        rev = SsdSequenceInputs(inp.X.data[::-1, :, 2:].copy(), inp.B.data[::-1].copy(),
                                inp.C.data[::-1].copy(), inp.A.data[::-1].copy())
        bwd = ssd_recurrent(rev).data[::-1]
        assert np.max(np.abs(y[:, :, 2:] - bwd)) < 1e-14

    def test_symmetric_under_reversal(self):
        # reversing tokens and swapping channel halves reproduces the output
        inp = random_inputs(10, P=4)
        y = bi_ssd(inp).data
        flipped = SsdSequenceInputs(
            np.concatenate([inp.X.data[::-1, :, 2:], inp.X.data[::-1, :, :2]], axis=2),
            inp.B.data[::-1].copy(), inp.C.data[::-1].copy(), inp.A.data[::-1].copy())
        y2 = bi_ssd(flipped).data[::-1]
        assert np.max(np.abs(y[:, :, :2] - y2[:, :, 2:])) < 1e-14
        assert np.max(np.abs(y[:, :, 2:] - y2[:, :, :2])) < 1e-14


class TestGradients:
    def test_recurrent_grad(self):
        inp = random_inputs(11, L=5, Hd=2, P=2, N=3)

        def f():
            return ssd_recurrent(inp).mean()

        assert grad_check(f, [inp.X, inp.B, inp.C, inp.A]) < 1e-5

    def test_quadratic_grad(self):
        inp = random_inputs(12, L=5, Hd=2, P=2, N=3)

        def f():
            return ssd_quadratic(inp).mean()

        assert grad_check(f, [inp.X, inp.B, inp.C]) < 1e-5
