#!/usr/bin/env python3

"""
File: test_catenc.py

Tests for the categorical encoders against their worked examples.
"""

import logging
import warnings

import numpy as np
import pytest

from prepbench import catenc
from prepbench.catenc import EncoderState, EncodingMethod
from prepbench.errors import ArgumentError, FitError, NotFittedError, UnseenCategoryWarning


logger = logging.getLogger(__name__)

THREE = ["Category 1", "Category 2", "Category 3"]
FOUR = THREE + ["Category 4"]


def one_vs_rest_separable(table: np.ndarray, category: int) -> bool:
    """True when some single column isolates `category` from every other row with one threshold."""
    for column in table.T:
        others = np.delete(column, category)
        if column[category] > others.max() or column[category] < others.min():
            return True
    return False


@pytest.mark.catenc
def test_onehot_is_the_identity_table():
    encoded = catenc.make_encoder("onehot").fit_transform(THREE)
    np.testing.assert_array_equal(encoded, np.eye(3))


@pytest.mark.catenc
def test_helmert_reverse_four_categories():
    encoded = catenc.make_encoder(EncodingMethod.HELMERT).fit_transform(FOUR)
    expected = np.array([
        [-1 / 2, -1 / 3, -1 / 4],
        [1 / 2, -1 / 3, -1 / 4],
        [0.0, 2 / 3, -1 / 4],
        [0.0, 0.0, 3 / 4],
    ])
    np.testing.assert_array_equal(encoded, expected)
    np.testing.assert_allclose(np.round(encoded, 2), [[-0.5, -0.33, -0.25], [0.5, -0.33, -0.25],
                                                      [0, 0.67, -0.25], [0, 0, 0.75]])


@pytest.mark.catenc
def test_helmert_contrasts_sum_to_zero():
    for n_categories in range(2, 9):
        state = catenc.fit("helmert", [f"c{k}" for k in range(n_categories)])
        assert state.width == n_categories - 1
        np.testing.assert_allclose(state.table.sum(axis=0), 0.0, atol=1e-15)


@pytest.mark.catenc
def test_frequency_encoding():
    column = ["Category 1"] * 25 + ["Category 2"] * 60 + ["Category 3"] * 15
    encoder = catenc.make_encoder("frequency").fit(column)
    np.testing.assert_array_equal(encoder.transform(THREE).ravel(), [0.25, 0.60, 0.15])
    assert encoder.state.table.sum() == pytest.approx(1.0)

    two = catenc.fit("frequency", ["a"] * 72 + ["b"] * 28)
    np.testing.assert_array_equal(catenc.transform(two, ["a", "b"]).ravel(), [0.72, 0.28])


@pytest.mark.catenc
def test_binary_encoding():
    encoded = catenc.make_encoder("binary").fit_transform(THREE)
    np.testing.assert_array_equal(encoded, [[0, 1], [1, 0], [1, 1]])
    for n_categories, width in ((1, 1), (3, 2), (4, 3), (7, 3), (8, 4)):
        state = catenc.fit("binary", [str(k) for k in range(n_categories)])
        assert state.width == width
        assert len({tuple(row) for row in state.table}) == n_categories


@pytest.mark.catenc
def test_category_order_is_first_appearance():
    state = catenc.fit("onehot", ["z", "a", "z", "m", "a"], feature="seg")
    assert state.category_order == ("z", "a", "m")
    assert state.columns == ("seg__onehot_1", "seg__onehot_2", "seg__onehot_3")
    np.testing.assert_array_equal(catenc.transform(state, ["m", "z"]), [[0, 0, 1], [1, 0, 0]])


@pytest.mark.catenc
def test_integer_and_missing_categories():
    state = catenc.fit("onehot", [1, 2, None, 1, np.nan])
    assert state.category_order == ("1", "2", catenc.MISSING_CATEGORY)
    np.testing.assert_array_equal(catenc.transform(state, [np.nan]), [[0, 0, 1]])


@pytest.mark.catenc
@pytest.mark.parametrize("method", list(EncodingMethod))
def test_unseen_category_encodes_to_zeros(method):
    state = catenc.fit(method, THREE)
    with pytest.warns(UnseenCategoryWarning):
        encoded = catenc.transform(state, ["Category 2", "Category 9"])
    np.testing.assert_array_equal(encoded[1], np.zeros(state.width))
    np.testing.assert_array_equal(encoded[0], state.table[1])


@pytest.mark.catenc
def test_seen_categories_do_not_warn():
    state = catenc.fit("binary", THREE)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        catenc.transform(state, THREE[::-1])


@pytest.mark.catenc
@pytest.mark.parametrize("n_categories", [2, 3, 4, 5])
def test_onehot_and_helmert_isolate_every_category(n_categories):
    categories = [f"c{k}" for k in range(n_categories)]
    onehot = catenc.fit("onehot", categories).table
    helmert = catenc.fit("helmert", categories).table
    for category in range(n_categories):
        assert one_vs_rest_separable(onehot, category)
        assert one_vs_rest_separable(helmert, category)


@pytest.mark.catenc
def test_encoder_errors():
    with pytest.raises(ArgumentError):
        catenc.make_encoder("target")
    with pytest.raises(FitError):
        catenc.fit("onehot", [])
    with pytest.raises(NotFittedError):
        catenc.make_encoder("onehot").transform(THREE)


@pytest.mark.catenc
def test_state_round_trip():
    state = catenc.fit("helmert", FOUR, feature="cat")
    restored = EncoderState.from_dict(state.to_dict())
    assert restored.category_order == state.category_order
    assert restored.columns == state.columns
    np.testing.assert_array_equal(restored.table, state.table)
