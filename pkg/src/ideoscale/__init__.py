"""Ideology scaling toolkit.

Two measurement pipelines and the statistics that relate them:

* ``netideo`` — scores accounts by who they follow: a binary follow matrix
  over "elite" columns, PPMI-transformed, factorized with truncated SVD,
  then projected onto a known ideology scale via a spline regression fitted
  on anchor accounts.
* ``textideo`` — scores authors by what they write: partisan phrases are
  induced from a party-labeled statement corpus with a smoothed log-odds
  contrast, curated into a balanced lexicon, and counted in article text.
* ``analysis`` — group means, correlations, 2-SD standardization and the
  fixed-effects regression connecting the two scores, with SVG figures.
* ``synth`` — seeded generators with known ground truth, used to verify
  that the pipeline recovers what was planted.
"""

__version__ = "0.1.0"
