"""Monte Carlo solver for semi-linear and quasi-linear partial
integro-differential equations driven by Levy noise.

The package splits into the noise layer (:mod:`levypide.levy`), sampled
space-time fields (:mod:`levypide.field`), path-wise simulation and
flow/Markov checks (:mod:`levypide.sfde`), the fixed-point solver with
residual verification and probes (:mod:`levypide.pide`), deterministic
spectral/Cole--Hopf oracles (:mod:`levypide.oracle`), and a YAML-driven
command line (:mod:`levypide.cli`).
"""

from . import field, levy, oracle, pide, sfde

__version__ = "0.1.0"

__all__ = ["field", "levy", "oracle", "pide", "sfde", "__version__"]
