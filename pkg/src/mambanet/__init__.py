"""Playoff outcome prediction with feature imitating networks.

Subpackages and modules:

- ``numerics``: float64 tensors, tape-based reverse-mode differentiation, layers, optimizers
- ``fin``: synthetic signals, statistic oracles, FIN training and layer surgery
- ``ingest``: CSV parsing, Elo / winning percentage, windows, normalization, datasets
- ``model``: FINDFF, MambaNet ablation rows, logistic reference
- ``evaluation``: splits, AUC, ablation runner, reports
- ``synth``: planted-signal league generator
- ``cli``: the ``mambanet`` command
"""
__version__ = "0.1.0"
