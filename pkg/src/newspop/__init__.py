"""Predict whether an entity's daily social-media popularity will be high or low from news features."""

__version__ = "0.1.0"
