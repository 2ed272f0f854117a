//! Free convolution of an initial spectrum with the semicircle law.

pub mod contour;
pub mod density;
pub mod edge;
pub mod interp;
pub mod matching;
pub mod solver;

pub use contour::{bracket_constant, edge_criticality, trace_contour, ContourPoint};
pub use density::{counting_function, density, eta_eval, quantiles, quantiles_with, total_mass, DensityTable, FreeConvolutionProfile};
pub use edge::{find_edge, find_edge_at, gamma0, EdgePoint};
pub use interp::{interpolating_measure, CountingTable};
pub use matching::{matching_compare, MatchingReport, MatchingRow};
pub use solver::{f_map, solve_mfc, solve_mfc_near, solve_mfc_with, stability_coefficients, SolverOptions, SpectralPoint, StabilityCoefficients};
