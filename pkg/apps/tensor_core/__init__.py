"""Tensor core application for the ICF inverse-estimation toolkit."""
