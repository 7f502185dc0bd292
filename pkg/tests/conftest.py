import json
import shutil

import pytest

from denguewatch.regions import Gazetteer
from denguewatch.synth import build_demo_data


@pytest.fixture(scope="session")
def gazetteer():
    return Gazetteer.load()


@pytest.fixture(scope="session")
def demo_template(tmp_path_factory):
    """One small demo store built once; tests copy it before mutating."""
    root = tmp_path_factory.mktemp("demo-template") / "data"
    build_demo_data(root, rng_seed=42, scale=0.05)
    return root


@pytest.fixture
def demo_store(demo_template, tmp_path):
    dest = tmp_path / "data"
    shutil.copytree(demo_template, dest)
    return dest


def write_corpus_file(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
    return path


def make_record(i, **overrides):
    rec = {
        "id": f"doc-{i:04d}",
        "url": f"https://news.example.bd/{i}",
        "source_domain": "paper01.example.bd",
        "published_on": "2019-08-10",
        "title": f"title {i}",
        "body": f"body text {i}",
    }
    rec.update(overrides)
    return rec
