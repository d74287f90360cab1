//! Atom library: the DCP subset and the saddle atoms.

mod dcp;
mod saddle;

pub use dcp::{
    abs, apply_dcp, exp, geo_mean, log, log_sum_exp, maximum, minimum, norm1, norm2, norm_inf, pos,
    sqrt, square, sum_squares, DcpAtom, Monotonicity,
};
pub use saddle::{
    inner, is_psd_matrix_expr, quasidef_quad_form, saddle_inner, saddle_quad_form,
    weighted_log_sum_exp, weighted_norm2, AtomDescriptor, SaddleAtom, SlotRule, QUASIDEF_EIG_FLOOR,
};

#[cfg(test)]
mod tests;
