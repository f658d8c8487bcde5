import numpy as np
import pytest

from labelscope.data import ClassMap, Example, LabeledDataset, ProbMatrix


def build_dataset(labels, classes=None, texts=None):
    """Tiny dataset with ids e0, e1, ... and the given integer labels."""
    if classes is None:
        classes = [f"class{j}" for j in range(max(labels) + 1 if labels else 2)]
        if len(classes) < 2:
            classes = ["class0", "class1"]
    examples = tuple(
        Example(f"e{i}", texts[i] if texts else f"text {i}", lab)
        for i, lab in enumerate(labels)
    )
    return LabeledDataset(examples, ClassMap(tuple(classes)))


def build_probs(ds, rows, kind="out-of-fold"):
    return ProbMatrix(ds.ids, np.asarray(rows, dtype=float), kind)


@pytest.fixture
def two_class_ds():
    return build_dataset([0, 0, 1, 1])
