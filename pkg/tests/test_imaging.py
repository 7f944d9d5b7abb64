import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from ReadTheFaultsIn.errors import ShapeError, ValidationError
from ReadTheFaultsIn.imaging import (
    GrayImage,
    MorphStep,
    StructuringElement,
    blackhat,
    closing,
    dilate,
    erode,
    flatten_image,
    gradient,
    normalize,
    opening,
    parse_chain,
    preprocess,
    preprocess_batch,
    read_pgm,
    reflect,
    reshape_to_image,
    tophat,
    write_pgm,
)

dyadic_images = arrays(np.float64, (8, 8), elements=st.integers(0, 8).map(lambda v: v / 8))
symmetric_elements = st.sampled_from([StructuringElement.square(3), StructuringElement.cross(3), StructuringElement.square(5)])

def test_reshape_examples():
    assert reshape_to_image(np.array([0.25])) == GrayImage([[0.25]])
    assert reshape_to_image(np.array([1.0, 2, 3, 4])) == GrayImage([[1.0, 2], [3, 4]])
    with pytest.raises(ShapeError):
        reshape_to_image(np.arange(5.0))

def test_flatten_inverts_reshape():
    values = np.arange(16.0)
    assert np.array_equal(flatten_image(reshape_to_image(values)), values)

def test_images_are_immutable_copies():
    source = np.zeros((2, 2))
    image = GrayImage(source)
    source[0, 0] = 1.0
    assert image.pixels[0, 0] == 0.0
    with pytest.raises(ValueError):
        image.pixels[0, 0] = 1.0

def test_normalize_examples():
    assert np.array_equal(normalize(np.array([[-1.0, 1.0]])), [[0.0, 1.0]])
    assert np.array_equal(normalize(np.array([[0.0, 2.0, 4.0]])), [[0.0, 0.5, 1.0]])
    flat = normalize(GrayImage([[3.0, 3.0], [3.0, 3.0]]))
    assert isinstance(flat, GrayImage)
    assert np.all(flat.pixels == 0.5)

def test_point_erodes_away_and_dilates_to_fill():
    image = np.zeros((3, 3))
    image[1, 1] = 1.0
    se = StructuringElement.square(3)
    assert np.array_equal(erode(image, se), np.zeros((3, 3)))
    assert np.array_equal(dilate(image, se), np.ones((3, 3)))

def test_constant_image_is_fixed():
    image = GrayImage(np.full((5, 5), 0.3))
    se = StructuringElement.cross(3)
    for op in (erode, dilate, opening, closing):
        assert op(image, se) == image

def test_structuring_element_checks():
    with pytest.raises(ValidationError):
        StructuringElement(np.ones((2, 2)))
    with pytest.raises(ValidationError):
        StructuringElement(np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        StructuringElement(np.ones((3, 5)))

    se = StructuringElement([[1, 0, 0], [0, 1, 0], [0, 0, 0]])
    assert not se.is_symmetric
    assert reflect(se) == StructuringElement([[0, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert reflect(reflect(se)) == se
    assert StructuringElement.cross(3).contains_origin

@given(dyadic_images, symmetric_elements)
def test_erosion_below_dilation_above(image, se):
    assert np.all(erode(image, se) <= image)
    assert np.all(image <= dilate(image, se))

@given(dyadic_images, symmetric_elements)
def test_erosion_dilation_duality(image, se):
    assert np.array_equal(erode(image, se), -dilate(-image, se))

@given(dyadic_images, symmetric_elements)
def test_opening_and_closing_are_idempotent(image, se):
    opened = opening(image, se)
    closed = closing(image, se)
    assert np.array_equal(opening(opened, se), opened)
    assert np.array_equal(closing(closed, se), closed)

@given(dyadic_images, symmetric_elements)
def test_opening_shrinks_closing_grows(image, se):
    assert np.all(opening(image, se) <= image)
    assert np.all(closing(image, se) >= image)

@given(dyadic_images, st.sampled_from([opening, closing]))
@settings(max_examples=50)
def test_batched_morphology_matches_single(image, op):
    se = StructuringElement.square(3)
    stack = np.stack([image, image[::-1], image.T])
    expected = np.stack([op(single, se) for single in stack])
    assert np.array_equal(op(stack, se), expected)

@given(dyadic_images, symmetric_elements)
def test_derived_operators_are_nonnegative(image, se):
    assert np.all(gradient(image, se) >= 0)
    assert np.all(tophat(image, se) >= 0)
    assert np.all(blackhat(image, se) >= 0)
    assert np.array_equal(gradient(image, se), dilate(image, se) - erode(image, se))

def test_step_parsing():
    assert MorphStep.parse("open3") == MorphStep("open", 3, "square")
    assert MorphStep.parse("close5c") == MorphStep("close", 5, "cross")
    assert str(MorphStep.parse("tophat7")) == "tophat7"
    with pytest.raises(ValidationError):
        MorphStep.parse("smooth3")
    with pytest.raises(ValidationError):
        MorphStep.parse("open")

def test_identity_chain_is_normalized_reshape():
    values = np.random.default_rng(0).normal(size=64)
    assert preprocess(values, chain=[]) == normalize(reshape_to_image(values))

def test_constant_segment_preprocesses_to_half():
    image = preprocess(np.full(64, 2.5))
    assert np.all(image.pixels == 0.5)

def test_open3_on_crafted_segment():
    values = np.array([
        0, 0, 0, 0,
        0, 8, 0, 0,
        0, 0, 4, 4,
        0, 0, 4, 4,
    ], dtype=np.float64)
    se = StructuringElement.square(3)
    expected = normalize(opening(normalize(reshape_to_image(values)), se))
    assert preprocess(values, ["open3"]) == expected
    # the lone spike is removed, the 2x2 block survives
    assert expected.pixels[1, 1] == 0.0
    assert expected.pixels[3, 3] == 1.0

def test_batch_preprocessing_matches_single():
    values = np.random.default_rng(1).normal(size=(5, 64))
    batch = preprocess_batch(values, ["open3", "close3c"])
    for row, image in zip(values, batch):
        assert np.allclose(image, preprocess(row, ["open3", "close3c"]).pixels)
    assert parse_chain(None) == parse_chain(["open3"])

def test_pgm_export(tmp_path):
    image = GrayImage(np.array([[0.0, 1.0], [0.5, 0.25]]))
    loaded = read_pgm(write_pgm(image, tmp_path / "img.pgm"))
    assert np.allclose(loaded.pixels, image.pixels, atol=1 / 255)

@pytest.mark.slow
@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1e3))
def test_full_size_segments_round_trip(seed, scale):
    values = np.random.default_rng(seed).normal(0.0, scale, 4096)
    image = reshape_to_image(values)
    assert image.pixels.shape == (64, 64)
    assert image.pixels[1, 0] == values[64]
    assert np.array_equal(flatten_image(image), values)

def test_package_exports_leave_builtins_alone():
    namespace = {}
    exec("from ReadTheFaultsIn.imaging import *", namespace)  # pylint: disable=exec-used
    assert "open" not in namespace and "close" not in namespace
    assert parse_chain(["open3", "close3c"])[0] == MorphStep("open", 3, "square")
