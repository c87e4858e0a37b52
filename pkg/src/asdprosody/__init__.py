"""Voice prosody features and ASD/TD classification from sustained-vowel recordings."""

__version__ = "0.1.0"
