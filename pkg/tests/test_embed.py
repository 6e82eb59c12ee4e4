import numpy as np
import pytest

import protoshot as ps
from protoshot import _kernels
from protoshot.embed import unflatten_feature_map
from protoshot.errors import (
    BadMagic,
    DimensionMismatch,
    InvalidArchitecture,
    TruncatedFile,
)

from conftest import assert_grads_close, finite_difference_grads, make_episode


class TestFlatten:
    @pytest.mark.parametrize(
        "shape,length", [((512, 7, 7), 25088), ((2048, 7, 7), 100352)]
    )
    def test_backbone_map_lengths(self, shape, length):
        fmap = ps.FeatureMap(values=np.zeros(shape))
        assert ps.flatten_feature_map(fmap).shape == (length,)

    def test_one_pixel_map(self):
        fmap = ps.FeatureMap(values=np.full((1, 1, 1), 5.0))
        assert np.array_equal(ps.flatten_feature_map(fmap), [5.0])

    def test_channel_major_order(self):
        vals = np.arange(2 * 2 * 3).reshape(2, 2, 3).astype(float)
        flat = ps.flatten_feature_map(ps.FeatureMap(values=vals))
        # index = c*(H*W) + h*W + w
        for c in range(2):
            for h in range(2):
                for w in range(3):
                    assert flat[c * 6 + h * 3 + w] == vals[c, h, w]

    def test_round_trip_bijection(self):
        rs = np.random.RandomState(0)
        vals = rs.randn(3, 4, 5)
        flat = ps.flatten_feature_map(ps.FeatureMap(values=vals))
        back = unflatten_feature_map(flat, (3, 4, 5))
        assert np.array_equal(back.values, vals)


class TestInit:
    def test_identity_has_no_params(self):
        net = ps.init_network("identity", [8, 8], 1)
        assert net.n_params == 0
        x = np.array([1.5, -2.0, 0.0, 3, 4, 5, 6, 7])
        assert np.array_equal(ps.embed_forward(net, x), x)

    def test_identity_dim_change_rejected(self):
        with pytest.raises(InvalidArchitecture):
            ps.init_network("identity", [8, 4], 1)

    def test_same_seed_bitwise_identical(self):
        a = ps.init_network("mlp", [10, 6, 4], 99)
        b = ps.init_network("mlp", [10, 6, 4], 99)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_uniform_bound_and_mean(self):
        # many seeds: empirical mean near zero, all weights inside the bound
        n_seeds = 10000 if _kernels.USE_NUMBA else 1500
        bound = np.sqrt(6.0 / (100 + 16))
        total, count = 0.0, 0
        for seed in range(n_seeds):
            w = ps.init_network("linear", [100, 16], seed).weights[0]
            assert np.max(np.abs(w)) <= bound
            total += w.sum()
            count += w.size
        # var of U(-b, b) is b^2/3
        se = bound / np.sqrt(3 * count)
        assert abs(total / count) <= 3 * se

    def test_biases_start_at_zero(self):
        net = ps.init_network("mlp", [5, 4, 3], 0)
        for b in net.biases:
            assert np.array_equal(b, np.zeros_like(b))


class TestForward:
    def test_linear_identity_matrix(self):
        net = ps.init_network("linear", [3, 3], 0)
        net = net.with_params([np.eye(3), np.zeros(3)])
        x = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(ps.embed_forward(net, x), x)

    def test_mlp_matches_matmul_oracle(self):
        rs = np.random.RandomState(4)
        net = ps.init_network("mlp", [5, 7, 3], 4)
        x = rs.randn(5)
        h = np.maximum(net.weights[0] @ x + net.biases[0], 0.0)
        expected = net.weights[1] @ h + net.biases[1]
        np.testing.assert_allclose(ps.embed_forward(net, x), expected, atol=1e-10)

    def test_forward_deterministic_bits(self):
        net = ps.init_network("mlp", [6, 5, 4], 7)
        x = np.random.RandomState(7).randn(6)
        assert np.array_equal(ps.embed_forward(net, x), ps.embed_forward(net, x))

    def test_dim_mismatch_rejected(self):
        net = ps.init_network("linear", [4, 2], 0)
        with pytest.raises(DimensionMismatch):
            ps.embed_forward(net, np.zeros(5))


class TestGradients:
    def test_identity_has_empty_gradients(self):
        ep = make_episode(0, dim=4)
        net = ps.init_network("identity", [4], 0)
        grads, loss = ps.loss_gradients(net, ep)
        assert grads == []
        protos = ps.compute_prototypes(ep.support_features, ep.support_labels, ep.n_way)
        assert loss == ps.episode_loss(ep.query_features, ep.query_labels, protos)

    def test_total_symmetry_gives_zero_gradient(self):
        ep = make_episode(1, dim=4)
        point = np.ones(4)
        ep = ps.Episode(
            class_ids=ep.class_ids,
            support_features=np.tile(point, (len(ep.support_labels), 1)),
            support_labels=ep.support_labels,
            support_indices=ep.support_indices,
            query_features=np.tile(point, (len(ep.query_labels), 1)),
            query_labels=ep.query_labels,
            query_indices=ep.query_indices,
        )
        net = ps.init_network("mlp", [4, 5, 3], 3)
        grads, _ = ps.loss_gradients(net, ep)
        norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads))
        assert norm <= 1e-9

    @pytest.mark.parametrize("arch,dims", [("linear", [6, 4]), ("mlp", [6, 5, 3])])
    def test_matches_finite_differences(self, arch, dims):
        for seed in range(4):
            ep = make_episode(seed + 10, n_way=3, k_shot=2, q_query=2, dim=dims[0])
            net = ps.init_network(arch, dims, seed)
            analytic, _ = ps.loss_gradients(net, ep)
            numeric = finite_difference_grads(net, ep)
            assert_grads_close(analytic, numeric)


class TestCheckpoint:
    @pytest.mark.parametrize(
        "arch,dims", [("identity", [6]), ("linear", [5, 3]), ("mlp", [4, 6, 2])]
    )
    def test_round_trip_bit_exact(self, tmp_path, arch, dims):
        net = ps.init_network(arch, dims, 42)
        path = tmp_path / "net.pfnw"
        ps.save_network(net, path)
        back = ps.load_network(path)
        assert back.architecture == net.architecture
        assert back.layer_dims == net.layer_dims
        for a, b in zip(net.params(), back.params()):
            assert np.array_equal(a, b)
        # write-again produces identical bytes
        path2 = tmp_path / "net2.pfnw"
        ps.save_network(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.pfnw"
        p.write_bytes(b"XXXX" + b"\x00" * 20)
        with pytest.raises(BadMagic):
            ps.load_network(p)

    def test_truncated(self, tmp_path):
        net = ps.init_network("linear", [5, 3], 0)
        p = tmp_path / "net.pfnw"
        ps.save_network(net, p)
        blob = p.read_bytes()
        p.write_bytes(blob[:-7])
        with pytest.raises(TruncatedFile):
            ps.load_network(p)
