import pytest

from detector.dev.fake_data import generate_tree
from detector.manifest import build_manifest, split_manifest

SHORT = 16000  # 1 s clips keep the network passes small


@pytest.fixture(autouse=True)
def feature_cache(tmp_path, monkeypatch):
    """every test gets its own LFCC cache directory"""
    cache = tmp_path / "lfcc_cache"
    monkeypatch.setenv("SPECRNET_CACHE_DIR", str(cache))
    return cache


@pytest.fixture
def fake_tree(tmp_path):
    """(root, layout) of 8 bonafide + 7 melgan + 7 pwg one-second clips"""
    root = tmp_path / "data"
    layout = generate_tree(root, nb_bonafide=8, nb_per_attack=7, length=SHORT)
    return root, layout


@pytest.fixture
def fake_manifest(fake_tree):
    """split manifest of the fake tree: 6/1/1 bonafide and 5/1/1 per attack"""
    root, layout = fake_tree
    return split_manifest(build_manifest(root, layout), seed=0)
