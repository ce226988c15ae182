"""ICF inverse-estimation toolkit applications."""
