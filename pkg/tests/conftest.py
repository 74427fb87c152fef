"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from pcgn import autodiff as ad
from pcgn import data as D
from pcgn import model as M


def random_params(config, seed, scale=0.7):
    """Parameters drawn at a scale where gradients are not vanishingly small.

    The training initializer draws from uniform(-0.08, 0.08); at that scale
    some attention gradients sit near 1e-10 where central differences are
    pure roundoff noise.  Fidelity checks use this instead.
    """
    rng = np.random.default_rng(seed)
    tensors = {
        name: ad.Tensor(rng.normal(0.0, scale, shape))
        for name, shape in M.param_spec(config)
    }
    return M.ModelParams(config, tensors)


def tiny_config(variant="PCGN", vocab_size=10, feature_dim=5, blog_layers=1, **over):
    base = dict(
        vocab_size=vocab_size,
        feature_dim=feature_dim,
        variant=M.variant_from_name(variant),
        embed_dim=3,
        blog_hidden=4,
        blog_layers=blog_layers,
        desc_hidden=3,
        desc_layers=1,
        user_dim=2,
    )
    base.update(over)
    return M.ModelConfig(**base)


@dataclass(frozen=True)
class ToyExample:
    """EncodedExample stand-in without the standard-id framing checks.

    Lets tests drive models whose bos/eos ids deviate from the production
    vocabulary layout (e.g. a single-token vocabulary).
    """

    x: tuple
    y: tuple
    f: np.ndarray
    d: tuple
    user_id: str = ""

    @property
    def target_len(self):
        return len(self.y) - 1


def tiny_example(config, seed=0, x_len=3, y_len=3, d_len=2):
    rng = np.random.default_rng(seed)
    lo, hi = 4, config.vocab_size  # keep specials out of the body
    x = tuple(int(v) for v in rng.integers(lo, hi, x_len))
    body = tuple(int(v) for v in rng.integers(lo, hi, y_len))
    d = tuple(int(v) for v in rng.integers(lo, hi, d_len))
    f = rng.normal(0.0, 1.0, config.feature_dim)
    return D.EncodedExample(
        x=x,
        y=(config.bos_id,) + body + (config.eos_id,),
        f=f,
        d=d,
        user_id="u0",
    )


@pytest.fixture(autouse=True)
def _finite_checks_on():
    """Each test starts from the default numeric guard state."""
    ad.set_finite_checks(True)
    ad.set_precision("double")
    yield
    ad.set_finite_checks(True)
    ad.set_precision("double")
