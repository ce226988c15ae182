"""Task-specific head application for the ICF inverse-estimation toolkit."""
