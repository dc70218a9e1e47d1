import numpy as np
import pytest

from quotient_em.datasets import WeightedDataset
from quotient_em.errors import DimensionError, DomainError


def test_equal_weight_constructor():
    ds = WeightedDataset.from_points(np.arange(6.0).reshape(3, 2))
    assert ds.n == 3 and ds.d == 2
    assert np.allclose(ds.weights, 1.0 / 3.0)


def test_one_d_points_promoted_to_column():
    ds = WeightedDataset.from_points(np.array([1.0, 2.0, 3.0]))
    assert ds.points.shape == (3, 1)


def test_weight_sum_enforced():
    with pytest.raises(DomainError, match="sum to 1"):
        WeightedDataset(points=np.zeros((2, 1)), weights=np.array([0.5, 0.6]))


def test_negative_weight_rejected():
    with pytest.raises(DomainError, match="nonnegative"):
        WeightedDataset(points=np.zeros((2, 1)), weights=np.array([1.5, -0.5]))


def test_length_mismatch_rejected():
    with pytest.raises(DimensionError):
        WeightedDataset(points=np.zeros((3, 1)), weights=np.array([0.5, 0.5]))


def test_moments():
    ds = WeightedDataset(points=np.array([[1.0, 0.0], [0.0, 2.0]]), weights=np.array([0.25, 0.75]))
    assert np.allclose(ds.mean(), [0.25, 1.5])
    assert np.allclose(ds.second_moment(), [[0.25, 0.0], [0.0, 3.0]])


def test_subset_renormalizes():
    ds = WeightedDataset(points=np.arange(4.0)[:, None], weights=np.array([0.1, 0.2, 0.3, 0.4]))
    sub = ds.subset([1, 3])
    assert np.allclose(sub.weights, [1.0 / 3.0, 2.0 / 3.0])


def test_csv_roundtrip_byte_identical(tmp_path):
    ds = WeightedDataset(
        points=np.array([[0.1, -2.0], [3.5, 0.25], [1e-7, 9.0]]),
        weights=np.array([0.2, 0.5, 0.3]),
    )
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    ds.to_csv(p1)
    WeightedDataset.from_csv(p1).to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_loader_renormalizes_and_records_correction(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("w,x1\n0.5,1.0\n0.5000000001,2.0\n")
    ds = WeightedDataset.from_csv(p)
    assert abs(float(np.sum(ds.weights)) - 1.0) <= 1e-15
    assert ds.weight_correction == pytest.approx(1e-10, rel=1e-3)


def test_loader_rejects_bad_header_and_bad_sum(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("weight,x1\n1.0,1.0\n")
    with pytest.raises(DomainError, match="header"):
        WeightedDataset.from_csv(p)
    p.write_text("w,x1\n0.4,1.0\n0.4,2.0\n")
    with pytest.raises(DomainError, match="tolerance"):
        WeightedDataset.from_csv(p)
