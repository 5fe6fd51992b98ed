"""Shared fixtures: planted panels, corpus directories, optional real data."""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np
import pytest

from mortclust.hmd import DataSelection, load_data_dir
from mortclust.synthdata import planted_panel, write_planted_corpus


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two hard labelings."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("labelings must have equal length")
    n = a.size
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2.0
    if math.isclose(max_index, expected):
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


@pytest.fixture(scope="session")
def planted():
    """(panel, true labels) for a 12-country, 3-cluster synthetic study."""
    panel, labels = planted_panel()
    return panel, np.asarray(labels)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """Directory of serialized life-table files for the planted study."""
    out = tmp_path_factory.mktemp("corpus")
    codes, labels = write_planted_corpus(out)
    return out, codes, np.asarray(labels)


@pytest.fixture(scope="session")
def replication_panel():
    """Real 30-country panel, 1960-2010; skipped when no data directory is set.

    Point MORTCLUST_DATA at a directory of bltper_5x1 files to enable the
    end-to-end replication tests.
    """
    data_dir = os.environ.get("MORTCLUST_DATA")
    if not data_dir:
        pytest.skip("MORTCLUST_DATA not set; replication tests need real data")
    path = Path(data_dir)
    if not path.is_dir():
        pytest.skip(f"MORTCLUST_DATA={data_dir} is not a directory")
    return load_data_dir(path, DataSelection.replication())
