"""Curvature-aware spectral graph learning.

Subpackages:

- :mod:`curvspec.graphs` -- graph containers, loaders, generators, spectra
- :mod:`curvspec.orc` -- Ollivier-Ricci curvature (exact / Sinkhorn / bounds)
- :mod:`curvspec.laplacian` -- curvature-weighted Laplacian + theorem checks
- :mod:`curvspec.stereo` -- kappa-stereographic gyrovector algebra
- :mod:`curvspec.manifolds` -- product signatures and signature estimation
- :mod:`curvspec.filters` -- generalized-PageRank filter banks
- :mod:`curvspec.encoding` -- Bochner random-feature curvature encodings
- :mod:`curvspec.model` -- end-to-end trainable model
- :mod:`curvspec.tensor` -- the reverse-mode tape backing the model
- :mod:`curvspec.cli` -- command-line entry points
"""

__version__ = "0.1.0"
