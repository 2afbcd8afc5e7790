import numpy as np
import pytest

from parallel_icl.core import Demonstration, Query


def make_demo(i, image, text=None, payload=None, demo_id=None):
    if text is None:
        text = image
    return Demonstration(
        id=demo_id or f"d{i}",
        image_feature=np.asarray(image, dtype=float),
        text_feature=np.asarray(text, dtype=float),
        payload=payload or {},
    )


def make_query(image, text=None, payload=None, query_id="q0", reference=None):
    if text is None:
        text = image
    return Query(
        id=query_id,
        image_feature=np.asarray(image, dtype=float),
        text_feature=np.asarray(text, dtype=float),
        payload=payload or {},
        reference_answer=reference,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
