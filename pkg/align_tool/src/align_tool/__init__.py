"""Alignment file producer for the evaluation harness.

Turns audio into the harness's alignment JSON schema: one token record
per word with start/end seconds and a Universal POS tag. The speech
backend is pluggable; the bundled one segments words by signal energy
and therefore needs a reference transcript for the word identities.
"""

__version__ = "0.1.0"
