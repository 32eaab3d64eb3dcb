import numpy as np
import pytest
from scipy import stats

from bridgematch.core import as_vec, draw_gaussian, draw_normals, root_stream, split_stream


def test_split_is_deterministic_and_leaves_parent_alone():
    parent = root_stream(5)
    a = split_stream(parent, 7)
    b = split_stream(parent, 7)
    np.testing.assert_array_equal(draw_normals(parent, 20), draw_normals(root_stream(5), 20))
    np.testing.assert_array_equal(draw_normals(a, 100), draw_normals(b, 100))


def test_split_depends_only_on_path_not_parent_consumption():
    p1, p2 = root_stream(5), root_stream(5)
    draw_normals(p2, 1000)
    np.testing.assert_array_equal(draw_normals(split_stream(p1, 3), 50), draw_normals(split_stream(p2, 3), 50))


def test_sibling_streams_uncorrelated():
    s = root_stream(0)
    a = draw_normals(split_stream(s, 7), 10_000)
    b = draw_normals(split_stream(s, 8), 10_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05


def test_split_order_matters():
    s = root_stream(0)
    ab = draw_normals(split_stream(split_stream(s, 1), 2), 100)
    ba = draw_normals(split_stream(split_stream(s, 2), 1), 100)
    assert not np.array_equal(ab, ba)


def test_gaussian_moments_and_ks():
    z = draw_normals(root_stream(11), 100_000)
    assert -0.02 <= z.mean() <= 0.02
    assert 0.98 <= z.var(ddof=1) <= 1.02
    assert stats.kstest(z, "norm").statistic < 0.01


def test_draw_gaussian_dim_and_replay():
    assert draw_gaussian(root_stream(1), 3).shape == (3,)
    np.testing.assert_array_equal(draw_gaussian(root_stream(1), 4), draw_gaussian(root_stream(1), 4))
    with pytest.raises(ValueError):
        draw_gaussian(root_stream(1), 0)


def test_seed_range_checked():
    root_stream(2**64 - 1)
    with pytest.raises(ValueError):
        root_stream(-1)
    with pytest.raises(ValueError):
        split_stream(root_stream(0), 2**64)


def test_as_vec_rejects_nonfinite_and_wrong_dim():
    assert as_vec([1, 2]).dtype == np.float64
    with pytest.raises(ValueError):
        as_vec([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vec([1.0, 2.0], dim=3)
