import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hakan.tensor as tt
from hakan.errors import ConfigError, DimensionError
from hakan.model import (
    HaKanModel,
    ModelConfig,
    RevInState,
    combine_channels,
    count_breakdown,
    embed,
    make_patches,
    model_param_count,
    revin_denormalize,
    revin_normalize,
    split_channels,
)
from hakan.tensor import Tensor


# ---------------------------------------------------------------- channels


class TestChannels:
    def test_single_channel_passthrough(self):
        x = np.arange(5.0).reshape(5, 1)
        rows = split_channels(x)
        np.testing.assert_array_equal(rows, [np.arange(5.0)])

    def test_column_order(self):
        rows = split_channels(np.array([[1.0, 10.0], [2.0, 20.0]]))
        np.testing.assert_array_equal(rows, [[1.0, 2.0], [10.0, 20.0]])

    def test_round_trip(self):
        x = np.random.default_rng(0).normal(size=(96, 7))
        np.testing.assert_array_equal(combine_channels(split_channels(x)), x)


# ---------------------------------------------------------------- revin


class TestRevin:
    def test_constant_series(self):
        out, state = revin_normalize(np.array([5.0, 5.0, 5.0]))
        np.testing.assert_array_equal(out, np.zeros(3))
        assert state.mean == 5.0 and state.std == 0.0

    def test_hand_zscore(self):
        out, _ = revin_normalize(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out, [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_round_trip_identity(self):
        x = np.random.default_rng(1).normal(2.0, 3.0, size=200)
        normed, state = revin_normalize(x)
        np.testing.assert_allclose(revin_denormalize(normed, state), x, atol=1e-9)

    def test_denormalize_zeros_gives_mean(self):
        x = np.random.default_rng(2).normal(size=50)
        _, state = revin_normalize(x)
        np.testing.assert_allclose(
            revin_denormalize(np.zeros(10), state), np.full(10, x.mean()), atol=1e-12
        )

    def test_unit_state_near_identity(self):
        out = revin_denormalize(np.array([1.0, -2.0]), RevInState(0.0, 1.0, 1e-5))
        np.testing.assert_allclose(out, [1.0 + 1e-5, -2.0 - 2e-5], atol=1e-12)


# ---------------------------------------------------------------- patching


class TestPatching:
    def test_reference_geometry(self):
        x = np.arange(96.0)
        patches = make_patches(x, 16, 8)
        assert patches.shape == (12, 16)
        np.testing.assert_array_equal(patches[-1][:8], np.arange(88.0, 96.0))
        np.testing.assert_array_equal(patches[-1][8:], np.full(8, 95.0))

    def test_window_equals_patch(self):
        x = np.arange(16.0)
        patches = make_patches(x, 16, 8)
        assert patches.shape == (2, 16)
        np.testing.assert_array_equal(patches[0], x)
        np.testing.assert_array_equal(patches[1], np.r_[x[8:], np.full(8, 15.0)])

    def test_enumerated_padding(self):
        patches = make_patches(np.arange(1.0, 11.0), 4, 3)
        np.testing.assert_array_equal(
            patches,
            [[1, 2, 3, 4], [4, 5, 6, 7], [7, 8, 9, 10], [10, 10, 10, 10]],
        )

    def test_patch_longer_than_window(self):
        with pytest.raises(ConfigError):
            make_patches(np.arange(8.0), 16, 8)

    def test_batched(self):
        x = np.random.default_rng(3).normal(size=(5, 20))
        patches = make_patches(x, 4, 4)
        assert patches.shape == (5, 6, 4)
        np.testing.assert_array_equal(patches[2, 1], x[2, 4:8])


# ---------------------------------------------------------------- embedding


class TestEmbed:
    def test_all_zero(self):
        out = embed(Tensor(np.ones((3, 4))), Tensor(np.zeros((4, 2))),
                    Tensor(np.zeros((3, 2))))
        np.testing.assert_array_equal(out.data, np.zeros((3, 2)))

    def test_zero_projection_returns_positions(self):
        pos = np.random.default_rng(4).normal(size=(3, 2))
        out = embed(Tensor(np.ones((3, 4))), Tensor(np.zeros((4, 2))), Tensor(pos))
        np.testing.assert_array_equal(out.data, pos)

    def test_matches_direct_recomputation(self):
        rng = np.random.default_rng(5)
        patches = rng.normal(size=(6, 4))
        w_p = rng.normal(size=(4, 3))
        w_pos = rng.normal(size=(6, 3))
        out = embed(Tensor(patches), Tensor(w_p), Tensor(w_pos))
        np.testing.assert_allclose(out.data, patches @ w_p + w_pos, atol=1e-12)


# ---------------------------------------------------------------- blocks


def _tiny_model(**overrides) -> HaKanModel:
    base = dict(lookback=8, horizon=4, patch_len=4, stride=2, embed_dim=3,
                n_blocks=1, bottleneck_dim=5, degree=2, seed=11)
    base.update(overrides)
    return HaKanModel(ModelConfig(**base))


class TestBlockForward:
    def test_zero_coefficients_are_identity(self):
        model = _tiny_model()
        block = model.blocks[0]
        block.intra.gamma.data[:] = 0.0
        block.inter.gamma.data[:] = 0.0
        x = np.random.default_rng(6).normal(size=(2, 4, 3))
        out = block.forward(Tensor(x))
        np.testing.assert_array_equal(out.data, x)

    def test_disabled_intra_zero_inter(self):
        model = _tiny_model(intra_enabled=False)
        block = model.blocks[0]
        block.inter.gamma.data[:] = 0.0
        x = np.random.default_rng(7).normal(size=(2, 4, 3))
        np.testing.assert_array_equal(block.forward(Tensor(x)).data, x)

    def test_hand_unrolled_two_by_two(self):
        # N = D = 2, degree 1, Hahn(1, 1, 7): P0 = 1, P1(s) = 1 - 4 s / 14,
        # squash(v) = 3.5 (tanh(v) + 1).  Fully unrolled reference below.
        cfg = ModelConfig(lookback=6, horizon=2, patch_len=4, stride=4,
                          embed_dim=2, n_blocks=1, bottleneck_dim=2, degree=1,
                          seed=0)
        assert cfg.n_patches == 2
        model = HaKanModel(cfg)
        block = model.blocks[0]
        rng = np.random.default_rng(8)
        block.intra.gamma.data = rng.normal(size=(2, 2, 2))
        block.inter.gamma.data = rng.normal(size=(2, 2, 2))
        x = rng.normal(size=(2, 2))

        def phi(gamma, q, row):
            total = 0.0
            for p in range(2):
                s = 3.5 * (np.tanh(row[p]) + 1.0)
                p1 = 1.0 - 4.0 * s / 14.0
                total += gamma[q, p, 0] * 1.0 + gamma[q, p, 1] * p1
            return total

        def kan_apply(gamma, mat):
            return np.array([[phi(gamma, q, mat[i]) for q in range(2)]
                             for i in range(mat.shape[0])])

        inner = kan_apply(block.intra.gamma.data, x)
        outer = kan_apply(block.inter.gamma.data, inner.T)
        expected = outer.T + x
        out = block.forward(Tensor(x[None])).data[0]
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_zero_initialized_stack_is_identity(self):
        model = _tiny_model(n_blocks=3)
        for block in model.blocks:
            block.intra.gamma.data[:] = 0.0
            block.inter.gamma.data[:] = 0.0
        x = np.random.default_rng(9).normal(size=(3, 4, 3))
        h = Tensor(x)
        for block in model.blocks:
            h = block.forward(h)
        np.testing.assert_array_equal(h.data, x)


# ---------------------------------------------------------------- forward


def reference_forward(model: HaKanModel, series: np.ndarray) -> np.ndarray:
    """Straight-line single-window forward, no tape, basis via closed form."""
    cfg = model.config
    mean = series.mean()
    scale = series.std() + cfg.revin_eps
    xn = (series - mean) / scale
    n, p = cfg.n_patches, cfg.patch_len
    patches = np.empty((n, p))
    for j in range(n):
        for t in range(p):
            patches[j, t] = xn[min(j * cfg.stride + t, cfg.lookback - 1)]
    h = patches @ model.w_p.data + model.w_pos.data

    def kan_ref(layer, mat):
        lo, hi = layer.basis.domain
        out = np.zeros((mat.shape[0], layer.out_dim))
        for i in range(mat.shape[0]):
            for q in range(layer.out_dim):
                acc = 0.0
                for pp in range(layer.in_dim):
                    s = lo + (hi - lo) * (np.tanh(mat[i, pp]) + 1.0) / 2.0
                    for r in range(layer.basis.size):
                        acc += layer.gamma.data[q, pp, r] * layer.basis.closed_form(r, s)
                out[i, q] = acc
        return out

    for block in model.blocks:
        cur = kan_ref(block.intra, h) if block.intra_enabled else h
        cur = cur.T
        cur = kan_ref(block.inter, cur) if block.inter_enabled else cur
        h = cur.T + h
    flat = h.reshape(-1)
    hidden = model.w_down.data @ flat
    pred = model.w_up.data @ hidden
    return pred * scale + mean


class TestForward:
    def test_zero_parameters_predict_window_mean(self):
        model = _tiny_model()
        for param in model.parameters():
            param.data[:] = 0.0
        x = np.random.default_rng(10).normal(3.0, 2.0, size=8)
        np.testing.assert_allclose(model.forward(x), np.full(4, x.mean()), atol=1e-12)

    def test_reference_shape_trace(self):
        cfg = ModelConfig(lookback=96, horizon=96, seed=1)
        assert cfg.n_patches == 12
        model = HaKanModel(cfg)
        assert model.w_p.shape == (16, 128)
        assert model.w_pos.shape == (12, 128)
        assert model.w_down.shape == (336, 12 * 128)
        assert model.w_up.shape == (96, 336)
        out = model.forward(np.random.default_rng(11).normal(size=96))
        assert out.shape == (96,)

    def test_matches_tape_free_reference(self):
        model = _tiny_model(n_blocks=2, seed=13)
        x = np.random.default_rng(12).normal(1.0, 2.0, size=8)
        np.testing.assert_allclose(model.forward(x), reference_forward(model, x),
                                   atol=1e-10)

    def test_reference_with_disabled_components(self):
        for flags in ((True, False), (False, True)):
            model = _tiny_model(intra_enabled=flags[0], inter_enabled=flags[1], seed=14)
            x = np.random.default_rng(15).normal(size=8)
            np.testing.assert_allclose(model.forward(x), reference_forward(model, x),
                                       atol=1e-10)

    def test_channel_independence_is_bitwise(self):
        model = _tiny_model(seed=16)
        x = np.random.default_rng(17).normal(size=(8, 2))
        joint = model.predict(x)
        for c in range(2):
            alone = model.predict(x[:, c:c + 1])
            np.testing.assert_array_equal(joint[:, c], alone[:, 0])

    def test_shift_scale_equivariance(self):
        # with eps = 0 the instance normalization removes affine changes exactly
        model = _tiny_model(revin_eps=0.0, seed=18)
        x = np.random.default_rng(19).normal(size=8)
        base = model.forward(x)
        moved = model.forward(2.0 * x + 5.0)
        np.testing.assert_allclose(moved, 2.0 * base + 5.0, atol=1e-6)

    def test_wrong_length_rejected(self):
        with pytest.raises(DimensionError):
            _tiny_model().forward(np.zeros(9))

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig(lookback=8, horizon=4, patch_len=16, stride=8).validate()
        with pytest.raises(ConfigError):
            ModelConfig(lookback=8, horizon=4, patch_len=4, stride=0).validate()


# ---------------------------------------------------------------- counting


class TestParamCount:
    def test_matches_live_model(self, tiny_config):
        model = HaKanModel(tiny_config)
        assert model.param_count() == model_param_count(tiny_config)

    def test_per_block_slope_at_reference_config(self):
        counts = {}
        for blocks in (1, 3, 5):
            cfg = ModelConfig(lookback=96, horizon=96, n_blocks=blocks)
            counts[blocks] = model_param_count(cfg)
        assert counts[3] - counts[1] == 2 * 66_112
        assert counts[5] - counts[3] == 2 * 66_112

    def test_no_blocks_means_no_gamma(self):
        cfg = ModelConfig(lookback=96, horizon=96, n_blocks=0)
        names = [name for name, _ in count_breakdown(cfg)]
        assert names == ["w_p", "w_pos", "w_down", "w_up"]

    def test_bottleneck_slope(self):
        base = model_param_count(ModelConfig(lookback=96, horizon=96))
        bumped = model_param_count(ModelConfig(lookback=96, horizon=96,
                                               bottleneck_dim=337))
        assert bumped - base == 12 * 128 + 96

    def test_linear_mode_shrinks_blocks(self):
        kan = dict(count_breakdown(ModelConfig(lookback=96, horizon=96)))
        lin = dict(count_breakdown(ModelConfig(lookback=96, horizon=96, mode="linear")))
        assert kan["block.0"] == 4 * lin["block.0"]
        assert kan["block.0"] == 66_112


# ---------------------------------------------------------------- checkpoint


class TestCheckpoint:
    def test_round_trip_is_value_exact(self, tmp_path):
        model = _tiny_model(seed=21)
        path = tmp_path / "model.npz"
        model.save(path)
        loaded = HaKanModel.load(path)
        assert loaded.config == model.config
        for (name_a, t_a), (name_b, t_b) in zip(model.named_parameters(),
                                                loaded.named_parameters()):
            assert name_a == name_b
            np.testing.assert_array_equal(t_a.data, t_b.data)
        x = np.random.default_rng(22).normal(size=8)
        np.testing.assert_array_equal(model.forward(x), loaded.forward(x))

    def test_missing_file(self, tmp_path):
        from hakan.errors import DataError
        with pytest.raises(DataError):
            HaKanModel.load(tmp_path / "nope.npz")

    def test_checkpoint_keys(self, tmp_path):
        model = _tiny_model()
        path = tmp_path / "model.npz"
        model.save(path)
        archive = np.load(path, allow_pickle=False)
        for key in ("w_p", "w_pos", "block.0.intra.gamma", "block.0.inter.gamma",
                    "w_down", "w_up"):
            assert key in archive


# ---------------------------------------------------------------- fuzzing


@settings(max_examples=40, deadline=None)
@given(
    lookback=st.integers(4, 48),
    horizon=st.integers(1, 12),
    patch_len=st.integers(2, 16),
    stride=st.integers(1, 8),
    embed_dim=st.integers(1, 6),
    n_blocks=st.integers(0, 2),
    bottleneck=st.integers(1, 10),
    degree=st.integers(0, 3),
)
def test_shape_contract_fuzz(lookback, horizon, patch_len, stride, embed_dim,
                             n_blocks, bottleneck, degree):
    if patch_len > lookback:
        patch_len = lookback
    cfg = ModelConfig(lookback=lookback, horizon=horizon, patch_len=patch_len,
                      stride=stride, embed_dim=embed_dim, n_blocks=n_blocks,
                      bottleneck_dim=bottleneck, degree=degree, seed=1)
    model = HaKanModel(cfg)
    x = np.random.default_rng(0).normal(size=(2, lookback))
    with tt.no_grad():
        out = model.forward_batch(x)
    assert out.shape == (2, horizon)
