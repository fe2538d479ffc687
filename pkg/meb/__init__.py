"""
Multiple expert brainstorming for domain adaptive re-identification.
"""
__version__ = "0.1.0"
