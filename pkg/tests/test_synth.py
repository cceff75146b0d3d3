import numpy as np
import pytest

from monarchbench.layout import VideoShape, aligned_config, config_from_sizes, enumerate_aligned_configs, phi_ordering
from monarchbench.synth import (
    DistanceKernel,
    SemanticPattern,
    SyntheticModelSpec,
    case_fixture,
    default_kernels,
    generate,
    random_semantic_pattern,
    verify_blockwise_rank1,
)
from oracles import np_singular_values


class TestKernels:
    def test_exponential_values(self):
        m = DistanceKernel("exponential", 4, 0.5).matrix()
        assert m[0, 0] == 1.0 and m[0, 3] == pytest.approx(0.125)
        assert (np.diff(m[0]) <= 0).all() and m.min() > 0 and m.max() <= 1

    def test_rational_values(self):
        m = DistanceKernel("rational", 3).matrix()
        assert m[0, 2] == pytest.approx(1.0 / 3.0) and m[1, 1] == 1.0

    def test_constant(self):
        assert np.array_equal(DistanceKernel("constant", 3).matrix(), np.ones((3, 3)))

    def test_gamma_validation(self):
        with pytest.raises(ValueError):
            DistanceKernel("exponential", 3, 1.5)


class TestGenerate:
    def test_constant_kernels_all_ones(self):
        shape = VideoShape(2, 2, 2)
        out = generate(SyntheticModelSpec(shape=shape, kernels=default_kernels(shape, "constant")))
        assert np.array_equal(out.matrix, np.ones((8, 8)))

    def test_1d_collapse_is_toeplitz_band(self):
        shape = VideoShape(1, 1, 6)
        kernels = (
            DistanceKernel("constant", 1),
            DistanceKernel("constant", 1),
            DistanceKernel("exponential", 6, 0.5),
        )
        d = generate(SyntheticModelSpec(shape=shape, kernels=kernels)).positional
        assert np.array_equal(d, d.T)
        for off in range(6):
            band = np.diagonal(d, offset=off)
            assert np.allclose(band, 0.5**off)

    def test_semantic_spike_lands_at_8_2(self):
        shape = VideoShape(2, 3, 3)
        ordering = phi_ordering(shape)
        qpos, kpos = (0, 2, 2), (0, 0, 2)
        assert ordering.index(qpos) == 8 and ordering.index(kpos) == 2
        spec = SyntheticModelSpec(
            shape=shape, kernels=default_kernels(shape),
            semantic=SemanticPattern(((qpos, kpos),), "singleton"),
        )
        out = generate(spec)
        assert out.semantic[8, 2] == 1.0 and out.semantic.sum() == 1.0
        assert out.matrix[8, 2] == out.positional[8, 2] + 1.0

    def test_components_reconstruct_exactly(self):
        shape = VideoShape(2, 3, 3)
        rng = np.random.default_rng(0)
        spec = SyntheticModelSpec(
            shape=shape, kernels=default_kernels(shape),
            semantic=random_semantic_pattern(shape, 4, rng), noise=1e-3, seed=11,
        )
        out = generate(spec)
        assert np.array_equal(out.raw, out.positional + out.semantic + out.noise)
        assert out.matrix is out.raw or np.array_equal(out.matrix, out.raw)

    def test_row_normalized_unit_sums(self):
        shape = VideoShape(2, 3, 3)
        spec = SyntheticModelSpec(shape=shape, kernels=default_kernels(shape), normalize="row", noise=1e-3, seed=3)
        out = generate(spec)
        assert np.abs(out.matrix.sum(axis=1) - 1.0).max() < 1e-12

    def test_deterministic_per_seed(self):
        shape = VideoShape(2, 3, 3)
        spec = SyntheticModelSpec(shape=shape, kernels=default_kernels(shape), noise=1e-2, seed=42)
        assert np.array_equal(generate(spec).matrix, generate(spec).matrix)


class TestBlockwiseRank1:
    @pytest.mark.parametrize("dims", [(2, 3, 3), (3, 4, 4), (2, 3, 4)])
    @pytest.mark.parametrize("kind", ["exponential", "rational", "constant"])
    def test_separable_map_rank1_everywhere(self, dims, kind):
        shape = VideoShape(*dims)
        d = generate(SyntheticModelSpec(shape=shape, kernels=default_kernels(shape, kind))).positional
        for cfg in enumerate_aligned_configs(shape):
            report = verify_blockwise_rank1(d, cfg, 1e-12)
            assert report.passed, (cfg.descriptor(), report.max_ratio)

    def test_misaligned_blocking_breaks_rank1(self):
        shape = VideoShape(2, 3, 3)
        kernels = (
            DistanceKernel("exponential", 2, 0.5),
            DistanceKernel("exponential", 3, 0.5),
            DistanceKernel("exponential", 3, 0.5),
        )
        d = generate(SyntheticModelSpec(shape=shape, kernels=kernels)).positional
        report = verify_blockwise_rank1(d, config_from_sizes(shape, 9, 2), 1e-12)
        assert report.max_ratio > 0.05

    def test_isolated_semantic_spike_keeps_rank1(self):
        # one spike in a block whose positional term is zeroed stays rank-1
        shape = VideoShape(2, 3, 3)
        cfg = aligned_config(shape, ("f", "h"))  # phi ordering, identity conjugation
        b1, b2 = cfg.b1, cfg.b2
        d = generate(SyntheticModelSpec(shape=shape, kernels=default_kernels(shape))).positional.copy()
        rows = [l * b2 + 0 for l in range(b1)]
        cols = [0 * b2 + i for i in range(b2)]
        d[np.ix_(rows, cols)] = 0.0  # zero block (j, k) = (0, 0)
        d[rows[2], cols[1]] = 1.0  # the isolated semantic entry
        report = verify_blockwise_rank1(d, cfg, 1e-12)
        assert report.passed


class TestCaseFixtures:
    @pytest.fixture
    def cfg(self):
        return aligned_config(VideoShape(2, 3, 3), ("f", "h"))

    def test_empty_case_rank1(self, cfg):
        block = case_fixture("empty", cfg.shape, cfg)
        assert block.shape == (6, 3)
        assert np_singular_values(block)[1] < 1e-14

    @pytest.mark.parametrize("case", ["singleton", "row_confined", "col_confined"])
    def test_confined_cases_rank1(self, cfg, case):
        sv = np_singular_values(case_fixture(case, cfg.shape, cfg))
        assert sv[0] > 0 and sv[1] < 1e-14

    def test_adversarial_case_rank2(self, cfg):
        sv = np_singular_values(case_fixture("adversarial", cfg.shape, cfg))
        assert sv[1] > 0.5

    def test_unknown_case(self, cfg):
        with pytest.raises(ValueError):
            case_fixture("bogus", cfg.shape, cfg)
