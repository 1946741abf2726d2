"""Repair-aware evaluation harness for spoken question answering.

Builds paired answerable/unanswerable audio conditions by masking word
spans, queries audio-language models (or deterministic mocks), classifies
responses into answer / refusal / repair categories, and reports task
competence (C), repair score (R), and their harmonic mean (EAR).
"""

__version__ = "0.1.0"
