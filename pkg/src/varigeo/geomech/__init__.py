"""Variational constructions: Poincare-Cartan data, Reeb-type solves, modified and
unified 2-forms, compatibility checks and structure classification."""

from varigeo.geomech.constructions import (
    Absorbed,
    Compatibility,
    Premulticontact,
    ReebFamily,
    TransversalSplit,
    absorb_holonomy,
    absorb_mixed,
    compatibility_check,
    coorientation,
    default_action_reebs,
    form_verdict,
    generic_action_reeb,
    lcs_defect,
    modified_precosymplectic,
    momentum_surface,
    omega_bar_mixed,
    omega_bar_nonholonomic,
    premulticontact_reeb,
    reeb_solve,
    split_transversal,
    wedge_power,
)
from varigeo.geomech.lagrangian import (
    cartan_forms,
    contact_form,
    hessian,
    hessian_inverse,
    herglotz_constraint,
    lagrangian_energy,
    lagrangian_field,
    lagrangian_two_form,
    poincare_cartan,
    position_velocity_pairs,
    regular_action_reeb,
    regular_time_reeb,
    tau,
)
from varigeo.geomech.problem import (
    ConstraintSet,
    GVProblem,
    VariationClass,
    lift_function_constraints,
)
from varigeo.geomech.classify import Flag, StructureReport, classify, restricted_rank
