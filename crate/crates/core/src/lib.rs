//! Porosity, dimension and cascade-measure computations on dyadic trees.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod counterexample;
pub mod dimension;
pub mod dyadic;
pub mod error;
pub mod porosity;
pub mod sets;
pub mod theorem;

pub use cascade::{
    bernoulli_cascade, comb_measure, counterexample_measure, lebesgue, CascadeMeasure, MassBracket,
    MeasureSpec, Round, SampledPoint, WeightRule,
};
pub use dyadic::{Box, CubeIndex, Dyadic};
pub use error::{Error, Result};
pub use sets::{
    comb_set, digit_constraint, even_digits_zero, example_set, full_set, has_m_hole, porous_scales,
    DyadicSet, PorousScaleSet, SetSpec,
};
pub use porosity::{
    mean_porosity_fraction, por_measure, por_set, porosity_profile, PorosityProfile, Resolution, Target,
};
pub use dimension::{
    box_dimension, dimension_certificate, holder_step, local_dimension, packing_dimension_estimate,
    CertificateVerdict, DimensionEstimate, TauRule, Verdict,
};
pub use theorem::{
    beta, constants, dim_bound, epsilon0, porosity_gain, verify_claim1, verify_claim2, ClaimParams,
    TheoremConstants,
};
pub use counterexample::{
    digit_equal_fraction, eta, eta_product, measure_of_set_approx, weighted_sum_check, EtaWeights,
};
