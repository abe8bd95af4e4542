"""Certified bounds on the formal global Lipschitz constant of ReLU networks."""
from .baselines import (RoundingOutcome, brute_force_fgl, matrix_norm_product, round_hyperplane,
                        rounding_estimate, sample_lower_bound)
from .lmi import AffineLmi, lmi_to_conic
from .network import (DenseLayer, Network, NetworkFormatError, ScalarNetwork, forward,
                      gradient_at, gradient_for_pattern, load_network, random_network,
                      save_network, select_output)
from .reductions import cut_norm_brute, cutnorm_to_network
from .relaxations import (CubeLift, FglEstimate, build_matrix_A, dgeolip_linf_2layer,
                          dgeolip_linf_multilayer, lipsdp_l2_2layer, lipsdp_l2_multilayer,
                          ngeolip_l2, ngeolip_linf)

__version__ = "0.1.0"
