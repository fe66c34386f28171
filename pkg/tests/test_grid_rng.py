"""Parámetro de Hurst, malla temporal y flujos aleatorios indexados por clave."""

import numpy as np
import pytest

from utils.errors import DomainError
from utils.grid import HurstParam, TimeGrid, as_hurst
from utils.rng import LANE_BRIDGE, LANE_BROWNIAN, SeedStream, normals_block, uniforms_block


class TestHurstParam:

    @pytest.mark.parametrize("value", [0.5, 0.6, 0.75, 0.999])
    def test_accepts_supported_range(self, value):
        assert as_hurst(value).value == value

    @pytest.mark.parametrize("value", [0.4, 1.0, 1.2, float('nan')])
    def test_rejects_outside_range(self, value):
        with pytest.raises(DomainError, match=r"\[0\.5, 1\)"):
            HurstParam(value)

    def test_brownian_flag(self):
        assert HurstParam(0.5).is_brownian
        assert not HurstParam(0.51).is_brownian

    def test_as_hurst_passthrough(self):
        h = HurstParam(0.7)
        assert as_hurst(h) is h


class TestTimeGrid:

    def test_nodes_end_exactly_at_horizon(self):
        grid = TimeGrid(3.0, 7)
        nodes = grid.nodes
        assert len(nodes) == 8
        assert nodes[0] == 0.0
        assert nodes[-1] == 3.0
        assert grid.dt == pytest.approx(3.0 / 7)

    @pytest.mark.parametrize("horizon,n_steps", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)])
    def test_invalid_grid(self, horizon, n_steps):
        with pytest.raises(DomainError):
            TimeGrid(horizon, n_steps)

    def test_index_of(self):
        grid = TimeGrid(2.0, 2048)
        assert grid.index_of(1.0) == 1024
        assert grid.index_of(2.0) == 2048
        with pytest.raises(DomainError):
            grid.index_of(1.0 + 0.3 * grid.dt)
        with pytest.raises(DomainError):
            grid.index_of(2.5)

    def test_truncated_keeps_step(self):
        grid = TimeGrid(2.0, 64)
        sub = grid.truncated(32)
        assert sub.n_steps == 32
        assert sub.dt == pytest.approx(grid.dt)
        assert sub.horizon == pytest.approx(1.0)

    def test_from_nodes(self):
        grid = TimeGrid.from_nodes(np.linspace(0.0, 1.0, 11))
        assert grid.n_steps == 10
        with pytest.raises(DomainError, match="uniformes"):
            TimeGrid.from_nodes([0.0, 0.1, 0.5, 1.0])
        with pytest.raises(DomainError):
            TimeGrid.from_nodes([0.1, 0.2])


class TestSeedStream:

    def test_same_key_same_numbers(self):
        a = SeedStream(42, 7).normals(100)
        b = SeedStream(42, 7).normals(100)
        np.testing.assert_array_equal(a, b)

    def test_prefix_property(self):
        long = SeedStream(42, 7).normals(100)
        short = SeedStream(42, 7).normals(10)
        np.testing.assert_array_equal(long[:10], short)

    @pytest.mark.parametrize("other", [SeedStream(43, 7), SeedStream(42, 8), SeedStream(42, 7, LANE_BRIDGE)])
    def test_different_keys_differ(self, other):
        base = SeedStream(42, 7).normals(50)
        assert not np.array_equal(base, other.normals(50))

    def test_negative_index_rejected(self):
        with pytest.raises(ValueError):
            SeedStream(1, -1)

    def test_with_lane(self):
        stream = SeedStream(5, 3).with_lane(LANE_BRIDGE)
        assert (stream.master_seed, stream.path_index, stream.lane) == (5, 3, LANE_BRIDGE)

    def test_block_rows_match_single_streams(self):
        block = normals_block(11, [4, 0, 9], 16, LANE_BROWNIAN)
        for row, index in zip(block, [4, 0, 9]):
            np.testing.assert_array_equal(row, SeedStream(11, index).normals(16))

    def test_uniforms_in_unit_interval(self):
        block = uniforms_block(3, range(5), 1000)
        assert block.shape == (5, 1000)
        assert np.all((block >= 0) & (block < 1))

    def test_large_seed_accepted(self):
        values = SeedStream(2 ** 64 - 1, 0).normals(4)
        assert np.all(np.isfinite(values))
