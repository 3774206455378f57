"""Quality-diversity search over rule-based Hanabi agents, plus cross-play
evaluation and a partner-adaptive meta-agent built on the resulting archive."""

__version__ = "0.1.0"
