"""UrbanRhythm-style mobility analysis: city images, staged spectral
features, hierarchical city states, and motif mining over the state series."""

__version__ = "0.1.0"
