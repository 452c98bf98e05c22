"""Attribute-inference-attack pipeline for MOBA match telemetry.

Subpackages cover the full pipeline: telemetry ingestion (`ingest`),
private-attribute schema (`attributes`), feature engineering (`features`),
correlation statistics (`stats`), classifiers and resampling (`models`),
the attack protocols (`attacks`), statistical validation (`validation`),
and a synthetic population generator (`synth`) for desk-scale runs.
"""

__version__ = "0.1.0"
