"""Parameter sets shared by the test modules."""

import numpy as np

from splitlv import ModelParams


def lv2d(**kw):
    base = dict(d=1, m=1, gamma1=[[3.0]], gamma2=[[3.0]], eta1=[5.0], eta2=[1.0], sigma1=[[1.0]], sigma2=[[0.0]])
    base.update(kw)
    return ModelParams(**base)


def lv4d(**kw):
    base = dict(
        d=2, m=3,
        gamma1=[[3.0, 0.0], [0.0, 5.0]],
        gamma2=[[7.0, 0.0], [0.0, 4.0]],
        eta1=[1.0, 4.0],
        eta2=[1.0, 2.0],
        sigma1=[[0.4, 0.5, 0.6], [0.4, 0.5, 0.6]],
        sigma2=np.zeros((2, 3)),
    )
    base.update(kw)
    return ModelParams(**base)


def random_diagonal_params(rng, d=None, m=None, noise2=True):
    d = d or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 4))
    return ModelParams(
        d=d, m=m,
        gamma1=np.diag(rng.uniform(0.5, 5.0, d)),
        gamma2=np.diag(rng.uniform(0.5, 5.0, d)),
        eta1=rng.uniform(0.5, 5.0, d),
        eta2=rng.uniform(0.5, 5.0, d),
        sigma1=rng.uniform(-1.0, 1.0, (d, m)),
        sigma2=rng.uniform(-1.0, 1.0, (d, m)) if noise2 else np.zeros((d, m)),
    )
