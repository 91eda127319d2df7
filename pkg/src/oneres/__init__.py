"""One-resonant germs: basins, Fatou coordinates, small-divisor elimination, root germs."""
from .basins import BasinParams, find_R0, in_basin, in_T, sample_basin
from .cycles import RootGermSpec, basin_permutation_check, make_root_germ, product_extension, verify_root
from .elimination import (ConjugationResult, ExponentSet, brjuno_omega, iterated_elimination,
                          nicer_tail_preset, solve_homological)
from .errors import *  # noqa: F401,F403
from .fatou import (CylinderPoint, FatouEvaluation, check_injectivity, cylinder_conjugation, fatou_psi,
                    fatou_sigma, global_coordinate, tau)
from .germs import GermSpec, Multipliers, evaluate, germ_from_json, make_multipliers, make_normal_form, make_perturbed
from .orbits import OrbitTrace, OrbitVerdict, check_asymptotics, classify_stable_orbit, iterate_orbit
from .series import TruncatedSeriesMap, compose, invert

__version__ = "0.1.0"
