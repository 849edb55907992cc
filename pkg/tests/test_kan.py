import math

import numpy as np
import pytest

import oracles
from qkanseq import grad_engine as ge
from qkanseq.daruan import daruan_forward, daruan_grad
from qkanseq.errors import ShapeError
from qkanseq.kan import HqkanBlock, QkanLayer, hqkan_forward, kan_grad, qkan_forward

pytestmark = pytest.mark.usefixtures("each_backend")


def neg_cos_layer(d, m):
    theta = np.zeros((d, m, 2, 2))
    theta[:, :, 1, 0] = math.pi / 2
    return QkanLayer(w=np.ones((d, m, 1)), theta=theta)


def random_layer(rng, d, m, L=2, offsets=False):
    return QkanLayer(w=rng.normal(0, 1.2, (d, m, L)), theta=rng.uniform(-np.pi, np.pi, (d, m, L + 1, 2)),
                     b=rng.normal(size=(d, m, L)) if offsets else None, use_offsets=offsets)


def random_block(rng, d, out, latent_dim=2, latent_out=2, L=1):
    return HqkanBlock(rng.normal(size=(latent_dim, d)), rng.normal(size=latent_dim),
                      random_layer(rng, latent_dim, latent_out, L), rng.normal(size=(out, latent_out)),
                      rng.normal(size=out))


def test_zero_layer_zero_output():
    layer = QkanLayer.zeros(3, 4, L=2)
    assert np.allclose(qkan_forward(np.array([0.3, -1.0, 2.0]), layer), 0.0, atol=1e-15)


def test_two_edge_closed_form():
    v = np.array([0.4, -1.3])
    out = qkan_forward(v, neg_cos_layer(2, 1))
    assert out == pytest.approx([-math.cos(0.4) - math.cos(-1.3)], abs=1e-14)


def test_degenerate_grid_is_single_daruan():
    rng = np.random.default_rng(0)
    layer = random_layer(rng, 1, 1)
    assert qkan_forward(np.array([0.7]), layer)[0] == pytest.approx(daruan_forward(0.7, layer.edge(0, 0)),
                                                                      abs=1e-15)


def test_forward_matches_edge_sum_oracle():
    rng = np.random.default_rng(1)
    layer = random_layer(rng, 3, 2, offsets=True)
    v = rng.normal(size=3)
    out = qkan_forward(v, layer)
    for j in range(2):
        ref = sum(oracles.daruan(v[i], layer.w[i, j], layer.b[i, j], layer.theta[i, j]) for i in range(3))
        assert out[j] == pytest.approx(ref, abs=1e-13)


def test_shape_errors():
    with pytest.raises(ShapeError):
        qkan_forward(np.zeros(2), QkanLayer.zeros(3, 1))
    with pytest.raises(ShapeError):
        QkanLayer(w=np.zeros((2, 1, 1)), theta=np.zeros((2, 1, 1, 2)))
    block = HqkanBlock.init(3, 1, rng=0)
    with pytest.raises(ShapeError):
        hqkan_forward(np.zeros(4), block)


def test_additivity_single_edge():
    rng = np.random.default_rng(2)
    full = random_layer(rng, 3, 3)
    i, j = 1, 2
    theta = np.zeros_like(full.theta)
    w = np.zeros_like(full.w)
    theta[i, j] = full.theta[i, j]
    w[i, j] = full.w[i, j]
    only = QkanLayer(w=w, theta=theta)
    v = rng.normal(size=3)
    out = qkan_forward(v, only)
    assert out[j] == pytest.approx(daruan_forward(v[i], full.edge(i, j)), abs=1e-14)
    # inactive edges at theta=0, w=0 contribute exactly zero
    assert np.allclose(np.delete(out, j), 0.0, atol=1e-15)


def test_node_sum_locality():
    rng = np.random.default_rng(3)
    layer = random_layer(rng, 2, 3)
    v = rng.normal(size=2)
    base = qkan_forward(v, layer)
    theta = layer.theta.copy()
    theta[0, 1] += 0.5
    moved = qkan_forward(v, QkanLayer(w=layer.w, theta=theta))
    assert moved[0] == base[0] and moved[2] == base[2]
    assert moved[1] != base[1]


def test_hqkan_identity_maps_equal_qkan():
    rng = np.random.default_rng(4)
    latent = random_layer(rng, 2, 2)
    block = HqkanBlock(np.eye(2), np.zeros(2), latent, np.eye(2), np.zeros(2))
    v = rng.normal(size=2)
    assert np.allclose(hqkan_forward(v, block), qkan_forward(v, latent), atol=1e-15)


def test_hqkan_zero_decoder_constant():
    block = HqkanBlock.init(3, 2, rng=1)
    block.dec_W[:] = 0.0
    block.dec_b[:] = [0.25, -1.5]
    for v in np.random.default_rng(5).normal(size=(4, 3)):
        assert np.array_equal(hqkan_forward(v, block), [0.25, -1.5])


def test_hqkan_matches_composition_oracle():
    rng = np.random.default_rng(6)
    block = random_block(rng, 3, 1, latent_dim=2, latent_out=2)
    v = rng.normal(size=3)
    z = block.enc_W @ v + block.enc_b
    lat = block.latent
    q = np.array([sum(oracles.daruan(z[i], lat.w[i, j], lat.b[i, j], lat.theta[i, j]) for i in range(2))
                  for j in range(2)])
    ref = block.dec_W @ q + block.dec_b
    assert np.allclose(hqkan_forward(v, block), ref, atol=1e-13)


def test_hqkan_init_conventions():
    block = HqkanBlock.init(4, 3, latent_dim=2, latent_out=1, rng=7)
    assert np.all(np.abs(block.enc_W) <= 0.5) and np.all(block.enc_b == 0)
    assert np.all(np.abs(block.dec_W) <= 1.0) and np.all(block.dec_b == 0)
    assert block.latent.theta.size == 2 * 1 * 4


def test_kan_grad_zero_upstream():
    rng = np.random.default_rng(8)
    for obj, d, m in [(random_layer(rng, 3, 2), 3, 2), (random_block(rng, 3, 2), 3, 2)]:
        dv, grads = kan_grad(rng.normal(size=d), obj, np.zeros(m))
        assert np.all(dv == 0)
        assert all(np.all(g == 0) for g in grads.values())


def test_kan_grad_degenerate_equals_daruan_grad():
    rng = np.random.default_rng(9)
    layer = random_layer(rng, 1, 1, L=3)
    dv, grads = kan_grad(np.array([0.3]), layer, np.array([1.0]))
    ref = daruan_grad(0.3, layer.edge(0, 0))
    assert dv[0] == pytest.approx(ref.du, abs=1e-15)
    assert np.allclose(grads["theta"][0, 0], ref.dtheta, atol=1e-15)
    assert np.allclose(grads["w"][0, 0], ref.dw, atol=1e-15)


def _layer_loss(v, layer, up):
    return float(up @ qkan_forward(v, layer))


@pytest.mark.parametrize("trial", range(6))
def test_kan_grad_layer_finite_differences(trial):
    rng = np.random.default_rng(100 + trial)
    d, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    layer = random_layer(rng, d, m, L=int(rng.integers(1, 3)), offsets=True)
    v, up = rng.normal(size=d), rng.normal(size=m)
    dv, grads = kan_grad(v, layer, up)

    def f(P):
        return _layer_loss(P["v"], QkanLayer(w=P["w"], theta=P["theta"], b=P["b"], use_offsets=True), up)

    params = {"v": v, "w": layer.w, "theta": layer.theta, "b": layer.b}
    err = ge.finite_diff_check(f, params, analytic={"v": dv, **grads})
    assert err < 1e-6


@pytest.mark.parametrize("trial", range(4))
def test_kan_grad_block_finite_differences(trial):
    rng = np.random.default_rng(200 + trial)
    block = random_block(rng, 3, 2)
    v, up = rng.normal(size=3), rng.normal(size=2)
    dv, grads = kan_grad(v, block, up)

    def f(P):
        lat = QkanLayer(w=P["w"], theta=P["theta"], b=P["b"], use_offsets=True)
        blk = HqkanBlock(P["enc_W"], P["enc_b"], lat, P["dec_W"], P["dec_b"])
        return float(up @ hqkan_forward(P["v"], blk))

    params = {"v": v, "enc_W": block.enc_W, "enc_b": block.enc_b, "w": block.latent.w,
              "theta": block.latent.theta, "b": block.latent.b, "dec_W": block.dec_W, "dec_b": block.dec_b}
    err = ge.finite_diff_check(f, params, analytic={"v": dv, **grads})
    assert err < 1e-6
