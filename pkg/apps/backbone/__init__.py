"""Backbone application for the ICF inverse-estimation toolkit."""
