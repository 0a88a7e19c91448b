import numpy as np
import pytest

from surveyfuse import EncodedDataset, FeatureDictionary


@pytest.fixture
def pair_dictionary():
    """Two binary features -> d = 4."""
    return FeatureDictionary(features=("A", "B"), categories=(("c", "d"), ("i", "j")))


@pytest.fixture
def single_dictionary():
    """One binary feature -> d = 2; vectors [1,0], [0,1], [0,0]."""
    return FeatureDictionary(features=("F",), categories=(("a", "b"),))


def make_dataset(dictionary, x, y, household_ids=None, survey_id="test", year=2017):
    x = np.asarray(x, dtype=np.uint8)
    if household_ids is None:
        household_ids = [f"h{i}" for i in range(x.shape[0])]
    return EncodedDataset(
        dictionary=dictionary,
        survey_id=survey_id,
        year=year,
        household_ids=np.array(household_ids, dtype=np.str_),
        x=x,
        y=np.asarray(y, dtype=np.float64),
    )


@pytest.fixture
def make_ds():
    return make_dataset


def random_one_hot(rng, dictionary, n, missing_rate=0.1):
    """Random valid one-hot matrix for the dictionary, with missing groups."""
    x = np.zeros((n, dictionary.dimension), dtype=np.uint8)
    for sl, cats in zip(dictionary.group_slices(), dictionary.categories):
        idx = rng.integers(0, len(cats), size=n)
        present = rng.random(n) >= missing_rate
        rows = np.flatnonzero(present)
        x[rows, sl.start + idx[rows]] = 1
    return x
