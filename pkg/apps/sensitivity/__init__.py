"""Sensitivity application for the ICF inverse-estimation toolkit."""
