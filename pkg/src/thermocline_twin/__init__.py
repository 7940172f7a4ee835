"""Package initializer for thermocline_twin.

SPDX-License-Identifier: MIT

This package contains a packed-bed thermocline and glycol heat-exchanger
simulator, linear and probabilistic SINDyC surrogates, numpy neural surrogates
and the active-learning harness that compares query strategies against
random sampling.
"""

__version__ = "0.1.0"
