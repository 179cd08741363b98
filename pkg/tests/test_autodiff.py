import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bagselect import autodiff as ad
from bagselect.autodiff import SGD, Tensor
from bagselect.kernels import BACKEND, get_backend

from .conftest import assert_grads_close, finite_difference


def test_softmax_symmetry():
    out = ad.softmax(Tensor([0.0, 0.0, 0.0]))
    assert np.allclose(out.data, [1 / 3, 1 / 3, 1 / 3])


def test_sigmoid_at_zero():
    assert ad.sigmoid(Tensor(0.0)).data == pytest.approx(0.5)


def test_conv2d_ones_oracle():
    # direct-summation oracle: every 5x5 window of ones sums to 25
    x = np.ones((1, 1, 8, 8))
    w = np.ones((1, 1, 5, 5))
    out = ad.conv2d(Tensor(x), Tensor(w))
    assert out.data.shape == (1, 1, 4, 4)
    assert np.allclose(out.data, 25.0)


def test_conv2d_matches_direct_summation(rng):
    x = rng.normal(size=(2, 3, 9, 10))
    w = rng.normal(size=(4, 3, 5, 5))
    out = ad.conv2d(Tensor(x), Tensor(w)).data
    for n in range(2):
        for f in range(4):
            for i in range(5):
                for j in range(6):
                    ref = np.sum(x[n, :, i:i + 5, j:j + 5] * w[f])
                    assert out[n, f, i, j] == pytest.approx(ref)


def test_square_gradient():
    x = Tensor(3.0, requires_grad=True)
    y = x * x
    y.backward()
    assert x.grad == pytest.approx(6.0)


def test_softmax_cross_entropy_closed_form(rng):
    logits = Tensor(rng.normal(size=(1, 5)), requires_grad=True)
    probs = ad.softmax(logits)
    loss = ad.cross_entropy(probs, [2])
    loss.backward()
    expected = probs.data.copy()
    expected[0, 2] -= 1.0
    assert np.allclose(logits.grad, expected, atol=1e-12)


def test_cross_entropy_values():
    uniform = Tensor(np.full((1, 15), 1 / 15))
    assert ad.cross_entropy(uniform, [3]).data == pytest.approx(np.log(15))
    sure = np.zeros((1, 4))
    sure[0, 1] = 1.0
    assert ad.cross_entropy(Tensor(sure), [1]).data == pytest.approx(0.0)
    p = np.array([[0.25, 0.25, 0.25, 0.25]])
    assert ad.cross_entropy(Tensor(p), [0]).data == pytest.approx(-np.log(0.25))


def test_cross_entropy_errors():
    uniform = Tensor(np.full((1, 4), 0.25))
    with pytest.raises(IndexError):
        ad.cross_entropy(uniform, [4])
    with pytest.raises(ValueError):
        ad.cross_entropy(Tensor([[0.5, 0.2]]), [0])


@pytest.mark.parametrize("op,shapes", [
    ("matmul", [(3, 4), (4, 2)]),
    ("add", [(3, 4), (4,)]),
    ("mul", [(3, 4), (3, 4)]),
    ("sigmoid", [(3, 4)]),
    ("tanh", [(3, 4)]),
    ("relu", [(3, 4)]),
    ("softmax", [(3, 5)]),
    ("log_softmax", [(3, 5)]),
    ("concat", [(2, 3), (2, 4)]),
    ("sum_along", [(2, 5, 3)]),
    ("conv2d", [(2, 2, 8, 8), (3, 2, 5, 5)]),
    ("avg_pool2", [(2, 3, 6, 6)]),
    ("attention_pool", [(2, 4, 3), (2, 3)]),
])
def test_primitive_gradients_finite_difference(op, shapes, rng):
    params = [Tensor(rng.normal(size=s) * 0.5, requires_grad=True) for s in shapes]
    probe = None

    def forward():
        if op == "matmul":
            out = params[0] @ params[1]
        elif op == "add":
            out = params[0] + params[1]
        elif op == "mul":
            out = params[0] * params[1]
        elif op == "concat":
            out = ad.concat(params, axis=1)
        elif op == "sum_along":
            out = ad.sum_along(params[0], axis=1)
        elif op == "conv2d":
            out = ad.conv2d(params[0], params[1])
        elif op == "avg_pool2":
            out = ad.avg_pool2(params[0])
        elif op == "attention_pool":
            out = ad.sigmoid_attention_pool(params[0], params[1])
        else:
            out = getattr(ad, op)(params[0])
        # scalarize with a fixed random projection
        flat = ad.reshape(out, (out.data.size,))
        return ad.sum_along(flat * probe, axis=0)

    probe = Tensor(rng.normal(size=_forward_size(op, shapes, rng)))
    loss = forward()
    loss.backward()
    numeric = finite_difference(lambda: float(forward().data), params)
    assert_grads_close([p.grad for p in params], numeric)


def _forward_size(op, shapes, rng):
    # evaluate once with dummies to learn the output size
    params = [Tensor(np.zeros(s)) for s in shapes]
    if op == "matmul":
        return shapes[0][0] * shapes[1][1]
    if op in ("add",):
        return int(np.prod(shapes[0]))
    if op == "concat":
        return shapes[0][0] * (shapes[0][1] + shapes[1][1])
    if op == "sum_along":
        return shapes[0][0] * shapes[0][2]
    if op == "conv2d":
        n, c, h, w = shapes[0]
        f, _, kh, kw = shapes[1]
        return n * f * (h - kh + 1) * (w - kw + 1)
    if op == "avg_pool2":
        n, c, h, w = shapes[0]
        return n * c * (h // 2) * (w // 2)
    if op == "attention_pool":
        return shapes[1][0] * shapes[1][1]
    return int(np.prod(shapes[0]))


def test_two_layer_network_gradient_check(rng):
    w1 = Tensor(rng.normal(size=(4, 6)) * 0.5, requires_grad=True)
    b1 = Tensor(np.zeros(6), requires_grad=True)
    w2 = Tensor(rng.normal(size=(6, 3)) * 0.5, requires_grad=True)
    b2 = Tensor(np.zeros(3), requires_grad=True)
    x = rng.normal(size=(5, 4))
    params = [w1, b1, w2, b2]

    def forward():
        h = ad.tanh(Tensor(x) @ w1 + b1)
        return ad.nll_from_logits(h @ w2 + b2, [0, 1, 2, 0, 1])

    loss = forward()
    loss.backward()
    numeric = finite_difference(lambda: float(forward().data), params)
    assert_grads_close([p.grad for p in params], numeric)


def test_embedding_lookup_and_gradient(rng):
    table = Tensor(rng.normal(size=(7, 3)), requires_grad=True)
    out = ad.embedding(table, [2, 2, 5])
    assert np.allclose(out.data, table.data[[2, 2, 5]])
    loss = ad.sum_along(ad.reshape(out, (9,)), axis=0)
    loss.backward()
    expected = np.zeros((7, 3))
    expected[2] = 2.0
    expected[5] = 1.0
    assert np.allclose(table.grad, expected)


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ad.ShapeError):
        (x * x).backward()


def test_matmul_shape_mismatch():
    with pytest.raises(ad.ShapeError):
        Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((4, 2)))


class TestGumbelSoftmax:
    def test_zero_noise_limit(self):
        logits = Tensor([1.0, 2.0, 0.5])
        out, _ = ad.gumbel_softmax(logits, 1.0, hard=False, noise=0.0)
        assert np.allclose(out.data, ad.softmax(logits).data)
        out2, _ = ad.gumbel_softmax(logits, 2.0, hard=False, noise=0.0)
        assert np.allclose(out2.data, ad.softmax(Tensor([0.5, 1.0, 0.25])).data)

    def test_simplex(self, rng):
        for _ in range(50):
            logits = Tensor(rng.normal(size=10) * 5)
            out, _ = ad.gumbel_softmax(logits, 0.7, hard=False, rng=rng)
            assert abs(out.data.sum() - 1.0) < 1e-9
            assert np.all(out.data >= 0)

    def test_hard_is_one_hot_with_soft_gradient(self, rng):
        logits = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
        out, idx = ad.gumbel_softmax(logits, 1.0, hard=True, rng=rng)
        assert np.allclose(out.data.sum(axis=-1), 1.0)
        assert set(np.unique(out.data)) <= {0.0, 1.0}
        assert np.array_equal(np.argmax(out.data, axis=-1), idx)
        probe = Tensor(rng.normal(size=(6, 1)))
        loss = ad.sum_along(ad.reshape(out @ probe, (4,)), axis=0)
        loss.backward()
        assert logits.grad is not None and np.any(logits.grad != 0)

    def test_peaked_logits_monte_carlo(self, rng):
        logits = Tensor(np.array([10.0] + [-10.0] * 9))
        draws = np.array([ad.gumbel_softmax(logits, 1.0, hard=True, rng=rng)[1]
                          for _ in range(100_000)])
        assert (draws == 0).mean() > 0.999

    def test_uniform_logits_monte_carlo(self, rng):
        logits = Tensor(np.zeros((100_000, 10)))
        _, idx = ad.gumbel_softmax(logits, 1.0, hard=True, rng=rng)
        freq = np.bincount(idx, minlength=10) / idx.size
        assert np.all(np.abs(freq - 0.1) < 0.01)

    def test_temperature_must_be_positive(self):
        with pytest.raises(ValueError):
            ad.gumbel_softmax(Tensor([0.0, 1.0]), 0.0, hard=False, noise=0.0)


class TestSGD:
    def test_single_step(self):
        p = Tensor(1.0, requires_grad=True)
        p.grad = np.array(2.0)
        SGD([p], lr=0.1).step()
        assert p.data == pytest.approx(0.8)

    def test_zero_gradient_is_identity(self):
        p = Tensor([1.0, -2.0], requires_grad=True)
        p.grad = np.zeros(2)
        opt = SGD([p], lr=0.5)
        opt.step()
        assert np.array_equal(p.data, [1.0, -2.0])
        assert opt.step_count == 1

    def test_two_steps_on_square(self):
        p = Tensor(1.0, requires_grad=True)
        opt = SGD([p], lr=0.1)
        for _ in range(2):
            opt.zero_grad()
            loss = p * p
            loss.backward()
            opt.step()
        assert p.data == pytest.approx(0.64)

    def test_lr_must_be_positive(self):
        with pytest.raises(ValueError):
            SGD([], lr=0.0)

    def test_shape_mismatch(self):
        p = Tensor([1.0, 2.0], requires_grad=True)
        p.grad = np.zeros(3)
        with pytest.raises(ad.ShapeError):
            SGD([p], lr=0.1).step()

    def test_nonfinite_gradient(self):
        p = Tensor([1.0], requires_grad=True, name="w")
        p.grad = np.array([np.nan])
        with pytest.raises(ad.NonFiniteError, match="w"):
            SGD([p], lr=0.1).step()


def test_determinism_same_seed():
    def trajectory():
        r = np.random.default_rng(7)
        p = Tensor(r.normal(size=(3, 3)), requires_grad=True)
        opt = SGD([p], lr=0.05)
        for _ in range(10):
            opt.zero_grad()
            x = Tensor(r.normal(size=(2, 3)))
            loss = ad.cross_entropy(ad.softmax(x @ p), [0, 1])
            loss.backward()
            opt.step()
        return p.data.copy()

    a, b = trajectory(), trajectory()
    assert np.array_equal(a, b)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=12))
@settings(max_examples=100, deadline=None)
def test_softmax_simplex_property(vals):
    out = ad.softmax(Tensor(vals)).data
    assert abs(out.sum() - 1.0) < 1e-9
    assert np.all(out >= 0)


def test_kernel_backends_agree(rng):
    np_backend = get_backend("numpy")
    try:
        cy_backend = get_backend("cython")
    except ImportError:
        pytest.skip("compiled kernels not built")
    x = rng.normal(size=(2, 3, 12, 12))
    w = rng.normal(size=(4, 3, 5, 5))
    g = np.ascontiguousarray(rng.normal(size=(2, 4, 8, 8)))
    assert np.allclose(np_backend.conv2d_forward(x, w),
                       cy_backend.conv2d_forward(x, w))
    gx_a, gw_a = np_backend.conv2d_backward(x, w, g)
    gx_b, gw_b = cy_backend.conv2d_backward(x, w, g)
    assert np.allclose(gx_a, gx_b)
    assert np.allclose(gw_a, gw_b)
