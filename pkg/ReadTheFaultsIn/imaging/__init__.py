from .image import GrayImage, flatten_image, normalize, read_pgm, reshape_to_image, write_pgm
from .morphology import (
    DEFAULT_CHAIN,
    MorphStep,
    StructuringElement,
    blackhat,
    closing,
    dilate,
    erode,
    gradient,
    opening,
    parse_chain,
    preprocess,
    preprocess_batch,
    reflect,
    tophat,
)
