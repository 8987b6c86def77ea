"""Signaling-scheme design for single-item second-price auctions.

The auctioneer observes a random state of nature that bidders only know in
distribution, and commits to a (public or private) randomized map from states
to signals before bidding.  This package computes exact and sampled optimal
public schemes when the auctioneer knows valuations, tail-pooling public
schemes when valuations are Bayesian, and near-full-surplus private schemes,
together with brute-force oracles for every guarantee.
"""

from .model import (
    BvsInstance,
    KvsInstance,
    KvsState,
    PublicScheme,
    Signal,
    ValueDistribution,
    make_example1,
    make_example2,
    make_example3,
    make_theorem2_instance,
    validate,
)

__all__ = [
    "BvsInstance",
    "KvsInstance",
    "KvsState",
    "PublicScheme",
    "Signal",
    "ValueDistribution",
    "make_example1",
    "make_example2",
    "make_example3",
    "make_theorem2_instance",
    "validate",
]

__version__ = "0.1.0"
