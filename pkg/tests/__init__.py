"""ICF inverse-estimation toolkit tests."""
