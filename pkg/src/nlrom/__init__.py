"""Nonlinear reduced-order models for structures with polynomial stiffness."""
from __future__ import annotations

import os

# thread count for the BLAS back-ends, honoured only if set before numpy loads
if "NLROM_THREADS" in os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["NLROM_THREADS"])

from .condensation import (IceSamples, correction_factor, ice_fit, ice_map, ice_sample,
                           static_condensation_third, stress_manifold_map)
from .continuation import Curve, HarmonicBalance, backbone, frf, gamma_from_backbone
from .dynamics import (Trajectory, compare_manifolds, gamma_closed_form, gamma_parts,
                       gamma_rom, integrate, modal_projection, reconstruct)
from .errors import ConvergenceError, ReductionError, ResonanceError, SchemaError
from .invariant import (dnf_second_order, gamma_equivalence_check, gamma_nf_rom, graph_multi,
                        graph_single, nf_third_order)
from .model import (ModalModel, MonomialClassification, PhysicalModel, assemble_modal,
                    check_tensor_symmetry, classify_monomials, eval_internal_force,
                    internal_resonances, spectral_quotient)
from .parametrisation import (diagonalize, gamma_engine, invariance_residual, parametrise,
                              residual_slope, to_real_graph)
from .qm import modal_derivative, qm_build
from .reduced import ManifoldMap, ReducedModel
from .step import StepPlan, choose_lambda, step_identify, step_model
from .zoo import (ZooSpec, as_blackbox, beam_physical, make_foundation_beam, make_modal,
                  make_shallow_arch, make_two_dof, make_vk_beam, random_modal)

__version__ = "0.1.0"
