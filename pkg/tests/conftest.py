import logging
import sys
from pathlib import Path

import pytest

from revbrowse.corpus import kcore_filter, load_corpus
from revbrowse.pipeline import RevBrowseRecommender
from revbrowse.synthetic import fixture_path

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.ERROR, logger="revbrowse")


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def synthetic_200():
    parsed = load_corpus(fixture_path("corpus", "synthetic_200.jsonl"))
    return kcore_filter(parsed.reviews, 5), parsed.items


@pytest.fixture(scope="session")
def fitted_200(synthetic_200):
    reviews, items = synthetic_200
    return RevBrowseRecommender(concurrency=1).fit(reviews, items)
