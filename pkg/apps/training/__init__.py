"""Training application for the ICF inverse-estimation toolkit."""
