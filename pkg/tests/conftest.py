import numpy as np
import pytest
from sklearn.datasets import load_digits

from jd2p.datasets import RawDataset, load_idx, write_idx
from jd2p.sim import prepare_data


@pytest.fixture(scope="session")
def digits_idx_dir(tmp_path_factory):
    """Real handwritten-digit data materialized as IDX containers.

    Round-trips through the same loader a full-size image dataset would use,
    so every digits-based test also exercises the IDX path.
    """
    digits = load_digits()
    raw = RawDataset(data=digits.data / 16.0, labels=digits.target.astype(int))
    out = tmp_path_factory.mktemp("digits_idx")
    write_idx(raw, out / "images.idx", out / "labels.idx", rows=8, cols=8)
    return out


@pytest.fixture(scope="session")
def digits_raw(digits_idx_dir):
    return load_idx(digits_idx_dir / "images.idx", digits_idx_dir / "labels.idx")


@pytest.fixture(scope="session")
def digits_pair_data(digits_raw):
    """3-vs-5 split embedded at 10 features (binary SVM experiments)."""
    pair = digits_raw.filter_classes((3, 5))
    train, test = pair.split(test_fraction=0.3, seed=0)
    return prepare_data(train, test, num_features=10)


@pytest.fixture(scope="session")
def digits_full_data(digits_raw):
    """All ten classes embedded at 10 features (MLP experiments)."""
    train, test = digits_raw.split(test_fraction=0.2, seed=0)
    return prepare_data(train, test, num_features=10)


def overlap_blobs(seed, samples_per_class=300, dim=6, separation=0.8):
    """Two overlapping Gaussian classes; most samples stay ambiguous for a
    few rounds, which is the regime where prefetching pays."""
    from jd2p.datasets import gen_synthetic

    means = np.zeros((2, dim))
    means[0, 0], means[1, 0] = -separation, separation
    means[0, 1], means[1, 1] = -0.3, 0.3
    return gen_synthetic(means, np.eye(dim), [samples_per_class, samples_per_class],
                         seed=seed)


@pytest.fixture(scope="session")
def blob_data():
    train = overlap_blobs(seed=11)
    test = overlap_blobs(seed=12, samples_per_class=150)
    return prepare_data(train, test, num_features=4)
