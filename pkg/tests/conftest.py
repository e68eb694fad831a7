import numpy as np
import pytest

from rotodiag.config import default_config
from rotodiag.dataset import FeatureDataset
from rotodiag.features import N_FEATURES
from rotodiag.pipeline import extract_features_in_memory
from rotodiag.synthgen import SynthSpec, generate_corpus


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """The 6-class, 10-files-per-class, 5 s @ 8 kHz desk corpus."""
    out = tmp_path_factory.mktemp("corpus")
    generate_corpus(SynthSpec(), out)
    return out


@pytest.fixture(scope="session")
def synth_dataset(synth_corpus):
    """Features extracted from the corpus with the shipped default config."""
    return extract_features_in_memory(default_config(), synth_corpus)


def make_dataset(features, class_ids, files, n_classes, origins=None, labels=None):
    """Small helper to assemble toy datasets row-wise."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if features.shape[1] < N_FEATURES:
        features = np.hstack([features, np.zeros((n, N_FEATURES - features.shape[1]))])
    class_ids = np.asarray(class_ids)
    files = np.asarray(files, dtype=object)
    origins = np.asarray(origins if origins is not None else ["original"] * n,
                         dtype=object)
    labels = np.asarray(labels if labels is not None else
                        [f"c{c}" for c in class_ids], dtype=object)
    return FeatureDataset(features, files, labels, class_ids, origins, n_classes)
