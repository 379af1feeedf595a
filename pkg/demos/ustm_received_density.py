"""Received-signal density for unitary space-time modulation.

With isotropically distributed isometric codewords the density of the
received block has a closed form through a determinant ratio.  The demo
compares it with averaging the conditional Gaussian density over random
codewords.

Run:  python demos/ustm_received_density.py
"""
import numpy as np

from mimomgf.ustm import UstmConfig, marginal_mc, received_density, sample_received

cfg = UstmConfig(T_coh=4, nt=2, nr=2, T=np.array([[2.0, 0.6], [0.6, 1.0]]))
for seed in range(3):
    Y = sample_received(cfg, seed)
    closed = received_density(cfg, Y)
    mc, se = marginal_mc(cfg, Y, n=50_000, seed=100 + seed)
    print(f"Y#{seed}: closed {closed:.6e}   averaged {mc:.6e} +- {se:.1e}")
