"""Checkable eigenvalue, gradient and heat-kernel inequalities."""
from .constants import (AuxJConstants, NeumannConstants, aux_J_constants, li_yau_nu,
                        neumann_constants)
from .closed import (check_aux_J, check_carron_bundle, check_cheng, check_harnack_closed,
                     check_li_yau_closed, check_lp_kato_trend, check_sg_norm_bound,
                     check_zhong_yang, curvature_deficit, heat_constant)
from .neumann import (check_J_bracket, check_eta1, check_harnack_neumann, check_li_yau_neumann,
                      check_neumann_hk, eta1_bounds)

__all__ = [
    "AuxJConstants", "NeumannConstants", "aux_J_constants", "li_yau_nu", "neumann_constants",
    "check_aux_J", "check_carron_bundle", "check_cheng", "check_harnack_closed",
    "check_li_yau_closed", "check_lp_kato_trend", "check_sg_norm_bound", "check_zhong_yang",
    "curvature_deficit", "heat_constant", "check_eta1", "check_harnack_neumann",
    "check_li_yau_neumann", "check_neumann_hk", "eta1_bounds", "check_J_bracket",
]
