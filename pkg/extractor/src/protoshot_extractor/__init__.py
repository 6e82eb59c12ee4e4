"""Frozen-backbone feature extraction into PFEB interchange files."""

__version__ = "0.1.0"

from .backbones import BACKBONES, BackboneSpec, build_backbone
from .extract import extract
