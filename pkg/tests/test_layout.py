import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monarchbench.layout import (
    LayoutError,
    VideoShape,
    aligned_config,
    build_permutation,
    config_from_sizes,
    enumerate_aligned_configs,
    flatten_index,
    make_tile_plan,
    phi_ordering,
    rho_ordering,
)
from monarchbench.synth import SyntheticModelSpec, default_kernels, generate

small_shapes = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4)).filter(
    lambda t: t[0] * t[1] * t[2] <= 64
)


class TestFlattenIndex:
    def test_phi_origin(self):
        assert flatten_index(phi_ordering(VideoShape(2, 3, 3)), (0, 0, 0)) == 0

    def test_phi_formula(self):
        # ((f0*h) + h0)*w + w0 for (1, 2, 2) in (2, 3, 3)
        assert flatten_index(phi_ordering(VideoShape(2, 3, 3)), (1, 2, 2)) == 17

    def test_rho_formula(self):
        # w0*f*h + (f0*h + h0) for (0, 0, 1)
        assert flatten_index(rho_ordering(VideoShape(2, 3, 3)), (0, 0, 1)) == 6

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            flatten_index(phi_ordering(VideoShape(2, 3, 3)), (0, 3, 0))

    @settings(max_examples=40, deadline=None)
    @given(small_shapes)
    def test_bijection_exhaustive(self, dims):
        shape = VideoShape(*dims)
        orderings = [phi_ordering(shape), rho_ordering(shape)]
        orderings += [cfg.ordering() for cfg in enumerate_aligned_configs(shape)]
        for ordering in orderings:
            seen = {
                flatten_index(ordering, (f0, h0, w0))
                for f0 in range(shape.f)
                for h0 in range(shape.h)
                for w0 in range(shape.w)
            }
            assert seen == set(range(shape.n))

    def test_tiled_ordering_bijection_and_grouping(self):
        shape = VideoShape(4, 6, 8)
        plan = make_tile_plan(shape, aligned_config(shape, ("f", "h")), (2, 3, 4))
        ordering = plan.ordering()
        idx = ordering.positions_by_phi()
        assert sorted(idx) == list(range(shape.n))
        # tokens of one (2, 3, 4) neighborhood occupy one tile
        s1, s2, b2 = plan.tile_b1, plan.tile_b2, plan.config.b2
        tile_of = {}
        for f0 in range(shape.f):
            for h0 in range(shape.h):
                for w0 in range(shape.w):
                    n = flatten_index(ordering, (f0, h0, w0))
                    l, j = divmod(n, b2)
                    tile = (l // s1, j // s2)
                    key = (f0 // 2, h0 // 3, w0 // 4)
                    tile_of.setdefault(key, set()).add(tile)
        assert all(len(tiles) == 1 for tiles in tile_of.values())


class TestBuildPermutation:
    def test_same_ordering_identity(self):
        shape = VideoShape(2, 3, 3)
        perm = build_permutation(shape, phi_ordering(shape), phi_ordering(shape))
        assert np.array_equal(perm.forward, np.arange(shape.n))

    def test_degenerate_axes_identity(self):
        shape = VideoShape(1, 1, 5)
        perm = build_permutation(shape, rho_ordering(shape), phi_ordering(shape))
        assert np.array_equal(perm.forward, np.arange(shape.n))

    def test_orthogonality_integer(self):
        shape = VideoShape(2, 3, 3)
        perm = build_permutation(shape, rho_ordering(shape), phi_ordering(shape))
        p = perm.matrix()
        assert np.array_equal(p @ p.T, np.eye(shape.n, dtype=np.int64))
        assert p.sum(axis=0).tolist() == [1] * shape.n
        assert p.sum(axis=1).tolist() == [1] * shape.n

    def test_positional_round_trip(self):
        # D = P @ D' with D' = P^T @ D, built from separable kernels
        shape = VideoShape(2, 3, 3)
        d = generate(SyntheticModelSpec(shape=shape, kernels=default_kernels(shape))).positional
        perm = build_permutation(shape, rho_ordering(shape), phi_ordering(shape))
        d_prime = perm.apply_rows_inverse(d)
        assert not np.array_equal(d_prime, d)
        assert np.array_equal(perm.apply_rows(d_prime), d)

    def test_shape_mismatch(self):
        with pytest.raises(LayoutError):
            build_permutation(
                VideoShape(2, 3, 3), phi_ordering(VideoShape(2, 3, 3)), phi_ordering(VideoShape(3, 3, 2))
            )

    @pytest.mark.parametrize("g1", [("f", "h"), ("w",), ("f", "w")])
    def test_general_pair_is_reshape_transpose(self, g1):
        # the permutation between the b2-slow and b1-slow slot orderings is
        # exactly the reshape-transpose map (j*b1 + l) -> (l*b2 + j)
        from monarchbench.layout import generalized_ordering

        shape = VideoShape(2, 3, 3)
        cfg = aligned_config(shape, g1)
        assert cfg.g2 is not None
        rho_like = generalized_ordering(shape, cfg.g2, cfg.g1)
        perm = build_permutation(shape, rho_like, cfg.ordering())
        expected = np.zeros((shape.n, shape.n), dtype=np.int64)
        for l in range(cfg.b1):
            for j in range(cfg.b2):
                expected[l * cfg.b2 + j, j * cfg.b1 + l] = 1
        assert np.array_equal(perm.matrix(), expected)


class TestEnumerateAlignedConfigs:
    def test_shape_233_six_distinct_assignments(self):
        configs = enumerate_aligned_configs(VideoShape(2, 3, 3))
        sizes = [(c.b1, c.b2) for c in configs]
        assert sizes == [(6, 3), (3, 6), (2, 9), (9, 2), (6, 3), (3, 6)]
        assert len({(c.b1, c.b2, c.g1) for c in configs}) == 6

    def test_pairwise_distinct_gives_six(self):
        assert len(enumerate_aligned_configs(VideoShape(2, 3, 5))) == 6
        assert len(enumerate_aligned_configs(VideoShape(4, 6, 8))) == 6

    def test_fully_degenerate_excluded(self):
        assert enumerate_aligned_configs(VideoShape(1, 1, 1)) == []
        assert enumerate_aligned_configs(VideoShape(1, 1, 7)) == []

    def test_degenerate_axis_dedup(self):
        configs = enumerate_aligned_configs(VideoShape(1, 3, 4))
        assert len(configs) == 2
        assert {(c.b1, c.b2) for c in configs} == {(3, 4), (4, 3)}

    def test_misaligned_raw_config_flag(self):
        cfg = config_from_sizes(VideoShape(2, 3, 3), 9, 2)
        assert not cfg.aligned
        aligned = config_from_sizes(VideoShape(2, 3, 3), 6, 3)
        assert aligned.aligned and aligned.g1 == ("f", "h")

    def test_size_mismatch_rejected(self):
        with pytest.raises(LayoutError):
            config_from_sizes(VideoShape(2, 3, 3), 5, 3)


class TestMakeTilePlan:
    def test_untiled_neighborhoods(self):
        shape = VideoShape(2, 3, 3)
        plan = make_tile_plan(shape, aligned_config(shape, ("f", "h")), (2, 3, 3))
        assert (plan.c1, plan.c2) == (1, 1)
        assert plan.untiled

    def test_frame_split(self):
        shape = VideoShape(2, 3, 3)
        plan = make_tile_plan(shape, aligned_config(shape, ("f", "h")), (1, 3, 3))
        assert (plan.c1, plan.c2) == (2, 1)

    def test_kernel_table_block_sizes(self):
        # tile blocks (h, w) from n_f = 1 and (3h, w) from n_f = 3
        shape = VideoShape(3, 4, 5)
        base = aligned_config(shape, ("f", "h"))
        plan1 = make_tile_plan(shape, base, (1, 4, 5))
        assert (plan1.tile_b1, plan1.tile_b2) == (shape.h, shape.w)
        plan3 = make_tile_plan(shape, base, (3, 4, 5))
        assert (plan3.tile_b1, plan3.tile_b2) == (3 * shape.h, shape.w)

    def test_degenerate_neighborhoods_dense(self):
        shape = VideoShape(2, 3, 3)
        plan = make_tile_plan(shape, aligned_config(shape, ("f", "h")), (1, 1, 1))
        assert (plan.tile_b1, plan.tile_b2) == (1, 1)

    def test_divisibility_violation(self):
        shape = VideoShape(2, 3, 3)
        with pytest.raises(LayoutError):
            make_tile_plan(shape, aligned_config(shape, ("f", "h")), (2, 2, 3))

    def test_requires_fh_w_base(self):
        shape = VideoShape(2, 3, 3)
        with pytest.raises(LayoutError):
            make_tile_plan(shape, aligned_config(shape, ("w",)), (2, 3, 3))
