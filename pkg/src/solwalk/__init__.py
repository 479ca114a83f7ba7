"""Random walks on the Lie group Sol and their boundary harmonic measures."""
from .sol_group import SolElement, BoundarySide, multiply, inverse, real_power, distance_bounds
from .lattice import LatticeElement, LatticeMeasure, make_lattice, convolution_power
from .step_measure import (StepMeasure, YRule, make_solomyak, make_erdos, make_singular_by_speed,
                           product_measure, from_lattice, drift, shannon_entropy, dimension_bound)
from .pisot import certify_pisot, PisotCertificate
from .vertical_walk import lundberg_exponent, return_probability, occupation_counts
from .boundary_sampler import sample_xi, sample_batch, speed_estimate, stationarity_check, EmpiricalMeasure
from .bernoulli_conv import ft_bernoulli, sample_b, support_interval, density_estimate
from .harmonic_analysis import (ecf, exact_ft_product, erdos_certificate, singularity_probe,
                                decay_exponent_fit, local_dimension, atom_diagnostic)

__version__ = "0.1.0"
