import numpy as np
import pytest

from sepkit import kernels


def _log_softmax(x):
    z = x - x.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _ext_labels(target, blank=0):
    out = [blank]
    for t in target:
        out.extend([t, blank])
    return np.array(out, dtype=np.int64)


def test_backend_is_reported():
    assert kernels.backend_name() in ("pure", "compiled")


@pytest.mark.skipif("compiled" not in kernels.available_backends(),
                    reason="compiled extension not built")
class TestBackendParity:
    def test_depthwise_conv_forward_backward(self, rng):
        pure = kernels.available_backends()["pure"]
        comp = kernels.available_backends()["compiled"]
        for _ in range(20):
            T = int(rng.integers(1, 40))
            C = int(rng.integers(1, 8))
            K = int(rng.choice([1, 3, 5, 9]))
            x = rng.normal(size=(T, C))
            k = rng.normal(size=(C, K))
            gy = rng.normal(size=(T, C))
            np.testing.assert_allclose(pure.depthwise_conv1d_forward(x, k),
                                       comp.depthwise_conv1d_forward(x, k),
                                       atol=1e-12)
            gx_p, gk_p = pure.depthwise_conv1d_backward(x, k, gy)
            gx_c, gk_c = comp.depthwise_conv1d_backward(x, k, gy)
            np.testing.assert_allclose(gx_p, gx_c, atol=1e-12)
            np.testing.assert_allclose(gk_p, gk_c, atol=1e-12)

    def test_depthwise_conv_float32(self, rng):
        comp = kernels.available_backends()["compiled"]
        x = rng.normal(size=(10, 3)).astype(np.float32)
        k = rng.normal(size=(3, 5)).astype(np.float32)
        y = comp.depthwise_conv1d_forward(x, k)
        assert y.dtype == np.float32

    def test_ctc_parity(self, rng):
        pure = kernels.available_backends()["pure"]
        comp = kernels.available_backends()["compiled"]
        for _ in range(50):
            T = int(rng.integers(1, 12))
            V = int(rng.integers(2, 6))
            L = int(rng.integers(0, 4))
            target = rng.integers(1, V, size=L)
            lab = _ext_labels(target)
            lp = np.ascontiguousarray(_log_softmax(rng.normal(size=(T, V))))
            loss_p, grad_p = pure.ctc_forward_backward(lp, lab, 0)
            loss_c, grad_c = comp.ctc_forward_backward(lp, lab.astype(np.int64), 0)
            if np.isinf(loss_p):
                assert np.isinf(loss_c)
                continue
            assert loss_p == pytest.approx(loss_c, abs=1e-12)
            np.testing.assert_allclose(grad_p, grad_c, atol=1e-12)


class TestCtcKernel:
    def test_gradient_rows_sum_to_minus_one(self, rng):
        lp = np.ascontiguousarray(_log_softmax(rng.normal(size=(7, 4))))
        _, grad = kernels.ctc_forward_backward(lp, _ext_labels([2, 3]), 0)
        np.testing.assert_allclose(grad.sum(axis=1), -1.0, atol=1e-12)

    def test_infeasible_target_returns_inf(self, rng):
        lp = np.ascontiguousarray(_log_softmax(rng.normal(size=(1, 4))))
        loss, grad = kernels.ctc_forward_backward(lp, _ext_labels([1, 2]), 0)
        assert np.isinf(loss)
        np.testing.assert_array_equal(grad, 0.0)

    def test_empty_target_is_all_blank_path(self, rng):
        lp = np.ascontiguousarray(_log_softmax(rng.normal(size=(5, 3))))
        loss, _ = kernels.ctc_forward_backward(lp, _ext_labels([]), 0)
        assert loss == pytest.approx(-lp[:, 0].sum())
