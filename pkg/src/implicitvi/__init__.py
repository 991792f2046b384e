"""Variational inference with implicit distributions.

Approximate posteriors are represented purely by a sampler (a generator
network pushing Gaussian noise through an MLP); the intractable density-ratio
terms of the evidence lower bound are estimated either adversarially, by
logistic-regression discriminators, or from the score extracted out of
denoising autoencoders. An evaluation harness compares the resulting
posteriors against exact grid / conjugate references.
"""

__version__ = "0.1.0"
