//! Numerical engine for Laplace inversion by Laguerre series and for
//! best unbiased estimation in gamma models.
//!
//! The crate is organized around the spine
//!
//! * [`series`] — exact truncated Taylor-jet arithmetic (the universal
//!   derivative carrier; no finite differencing anywhere),
//! * [`dsl`] — a small expression language for the transform `φ` or the
//!   parametric function `h`, evaluated pointwise over ℂ or as a jet,
//! * [`basis`] — the orthonormal generalized-Laguerre system for the
//!   gamma weight, with exact moment inner products and a Rodrigues
//!   cross-check,
//! * [`inversion`] — the Laguerre-series Laplace inversion with
//!   coefficient-decay diagnostics, plus Post-Widder, Bromwich and the
//!   probabilistic-CDF baselines,
//! * [`umvue`] — Fourier coefficients β, the UMVUE series, its variance
//!   series and the Cramér-Rao comparison,
//! * [`mc`] — seed-stable Monte Carlo validation.

pub mod basis;
pub mod dsl;
pub mod error;
pub mod inversion;
pub mod mc;
pub mod series;
pub mod umvue;

pub use basis::{build_basis, moment_inner_product, GammaModel, OrthoBasis, WeightedPoly};
pub use dsl::{ParseError, TransformExpr};
pub use error::{Error, Result};
pub use inversion::{
    classify_coefficients, diagnosis_order, invert_bromwich, invert_cdf_probabilistic,
    invert_laguerre, invert_post_widder, phi_to_coeffs, BromwichResult, CoeffDiagnostics,
    DecayClass, EstimatorSeries, InversionReport, Method, MethodParams, SeriesKind, Verdict,
};
pub use mc::{run_mc, sample_gamma, McConfig, McReport, Xoshiro256pp};
pub use series::{OrderLimit, PowerSeries, DEFAULT_MAX_ORDER, ORDER_CEILING};
pub use umvue::{
    beta_derivative_form, beta_simple, build_umvue, cr_bound, variance_series, BetaCoeffs,
    EstimationProblem, VarianceSeries,
};
