"""Learning-augmented online bipartite matching with advice.

Fractional algorithms (LAB, PAW, baselines), their dual certificates,
adaptive adversaries, a factor-revealing LP, AdWords rounding and an
experiment runner.
"""

from .core import (Allocation, ArrivalEvent, DualCertificate, GraphInstance, ParseError,
                   RunError, RunResult, parse_instance, serialize_instance,
                   validate_fractional_matching)
from .lab import lab_certify, lab_run
from .numerics import (c_lab, c_paw, lambda_lab_for_consistency, lambda_paw_for_consistency,
                       lambert_w, map_lambda_equal_consistency, r_lab, r_paw)
from .paw import paw_certify, paw_run

__version__ = "0.1.0"
