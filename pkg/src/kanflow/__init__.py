"""Traffic-flow forecasting with spline-based Kolmogorov-Arnold layers in GCNs.

The package is organized around a small reverse-mode tape (:mod:`diffcore`),
spline layers (:mod:`kan`), graph construction (:mod:`graph`), preprocessing
(:mod:`preprocess`), feature attribution (:mod:`featsel`), model composition
and losses (:mod:`model`), training and experiments (:mod:`training`,
:mod:`experiments`), classical baselines (:mod:`baselines`), synthetic tasks
(:mod:`synthdata`), and a batch CLI (:mod:`cli`).
"""

__version__ = "0.1.0"
