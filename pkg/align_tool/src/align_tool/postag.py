"""Rule-based Universal POS tagging.

A closed-class lexicon covers the function words the harness cares about
(its invariant mask only ever targets DET/ADP/AUX/CCONJ/SCONJ/PRON/PART
tokens). Number words map to NUM. Anything the lexicon does not know is
tagged X, which is a valid Universal tag and never mask-eligible.
"""

from __future__ import annotations

UPOS_TAGS = frozenset(
    "ADJ ADP ADV AUX CCONJ DET INTJ NOUN NUM PART PRON PROPN PUNCT SCONJ SYM VERB X".split()
)

_LEXICON = {}


def _add(tag, words):
    for w in words.split():
        _LEXICON[w] = tag


_add("DET", "the a an this these those each every some any no")
_add("ADP", "of in on at from to with for by about over under into near "
            "through between behind after before during")
_add("AUX", "is are was were am be been being will would can could shall "
            "should may might must do does did has have had")
_add("CCONJ", "and or but nor yet so")
_add("SCONJ", "if because while although that whether since unless until")
_add("PRON", "i you he she it we they me him her us them my your his its "
             "our their mine yours hers theirs what which who whom whose "
             "someone anyone everyone nothing something")
_add("PART", "not")
_add("ADV", "really very too also most least never always often sometimes "
            "here there now then")
_add("NUM", "zero one two three four five six seven eight nine ten eleven "
            "twelve twenty thirty hundred thousand")


def tag_word(word: str) -> str:
    w = word.strip().lower()
    if not w:
        return "X"
    if w in _LEXICON:
        return _LEXICON[w]
    if w.replace(".", "", 1).replace(",", "").isdigit():
        return "NUM"
    return "X"


def normalize_tag(tag: str) -> str:
    """Map an arbitrary backend tag into the Universal set (unknown -> X)."""
    tag = tag.strip().upper()
    return tag if tag in UPOS_TAGS else "X"
