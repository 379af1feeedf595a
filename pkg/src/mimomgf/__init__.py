"""Closed-form statistics of the MIMO mutual information I = log det(I + G^H G).

Modules
-------
numkit      confluent determinant ratios and stable log-determinants
specfun     quadrature-backed special functions
groupcheck  numeric checks of the U(M) character machinery
channels    channel ensembles, correlation model, sampling
eigdens     joint eigenvalue densities
mgfcap      moment generating function, ergodic capacity, outage
mcsim       Monte Carlo oracle
ustm        received-signal density for unitary space-time transmission
cli         command-line front end
"""

__version__ = "0.1.0"
