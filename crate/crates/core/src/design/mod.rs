//! Error-budget models, performance landscapes and the design iteration.

pub mod density;
pub mod landscape;
pub mod leakage;
pub mod metric;
pub mod noise;
pub mod optimize;

pub use density::{simulate_reference_circuit, simulate_reference_circuit_with, ErrorSelection};
pub use landscape::{landscape_scan, mask_overlap, optimal_mask, Grid, Landscape};
pub use leakage::{sqg_leakage, LeakageModel, LeakageTable};
pub use metric::{parity_term, performance_metric, CircuitSpec, ErrorSource, MetricBreakdown};
pub use noise::{flux_dephasing_advanced, scale_rates, thermal_excitation, ModelKind, NoiseModel};
pub use optimize::{optimize_loop, MeasuredCoherence, Proposal};
