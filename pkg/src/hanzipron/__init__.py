"""Learning to pronounce logographic text from non-parallel character and syllable corpora."""

__version__ = "0.1.0"
