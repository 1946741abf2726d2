import pytest

from align_tool.postag import UPOS_TAGS, normalize_tag, tag_word


@pytest.mark.parametrize("word,tag", [
    ("the", "DET"), ("The", "DET"), ("of", "ADP"), ("is", "AUX"),
    ("and", "CCONJ"), ("because", "SCONJ"), ("they", "PRON"),
    ("not", "PART"), ("nine", "NUM"), ("42", "NUM"),
    ("steak", "X"), ("guitar", "X"), ("", "X"),
])
def test_lexicon(word, tag):
    assert tag_word(word) == tag


def test_all_outputs_are_universal_tags():
    words = "the quick brown fox is over seven lazy dogs and luna".split()
    for w in words:
        assert tag_word(w) in UPOS_TAGS


def test_normalize_unknown_backend_tag():
    assert normalize_tag("VBZ") == "X"
    assert normalize_tag("noun") == "NOUN"
