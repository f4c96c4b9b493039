"""Mention detection toolkit for visually grounded dialogue.

Everything around the neural model itself: the dialogue/mention data model,
the marker-annotated reproduction grammar, constrained-decoding session
automaton, training-sample construction, sequence-labeling and NP-extraction
baselines, split management, and the span evaluation suite.
"""

__version__ = "0.1.0"
