import pytest

from ear_harness.fixtures import build_fixture_corpus


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """The bundled 10-instance synthetic corpus, built once per session."""
    root = tmp_path_factory.mktemp("fixture_corpus")
    return build_fixture_corpus(root)
