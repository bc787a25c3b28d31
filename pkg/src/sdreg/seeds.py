"""Deterministic seed substreams.

A single master seed drives every random choice in an experiment.  Distinct
pipeline stages pull from *named* substreams so that, e.g., adding one more
probe to the evaluation stage cannot perturb the data-generation stage.

The derivation is a documented, platform-independent hash:

    substream(seed, label)  =  Generator(PCG64(SeedSequence([seed, w0..w7])))

where ``w0..w7`` are the first eight little-endian 32-bit words of
``SHA-256(label)``.  Per-sample streams append the sample index to the
entropy list, so parallel generation of sample ``j`` never depends on how
many samples other workers have drawn.
"""

import hashlib

import numpy as np


def _label_words(label):
    """Hash a text label into eight 32-bit entropy words."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[4 * k:4 * k + 4], "little") for k in range(8)]


def seed_sequence(seed, label, index=None):
    """Build the SeedSequence for a named substream of a master seed.

    Parameters
    ----------
    seed : int
        Master seed (any nonnegative 64-bit integer).
    label : str
        Name of the substream, e.g. ``"generation"`` or ``"probes"``.
    index : int, optional
        Per-sample index appended to the entropy, for streams that must be
        independent sample-by-sample.

    Returns
    -------
    numpy.random.SeedSequence
    """
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    entropy = [seed] + _label_words(label)
    if index is not None:
        entropy.append(int(index))
    return np.random.SeedSequence(entropy)


def substream(seed, label, index=None):
    """Return a ``numpy.random.Generator`` for a named substream.

    See :func:`seed_sequence` for the derivation.
    """
    return np.random.default_rng(seed_sequence(seed, label, index=index))
