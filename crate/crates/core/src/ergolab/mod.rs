//! Long-time behaviour: time-averaged laws, uniqueness and coupling probes,
//! and the controlled steering experiment behind the reachability estimate.

mod coupling;
mod measure;
mod observable;
mod steering;

pub use coupling::{synchronous_coupling, uniqueness_probe, CouplingCurve, ObservableDistance, UniquenessReport, BOOTSTRAP_REPLICATES};
pub use measure::{equal_width_edges, histogram, krylov_bogolyubov, tv_distance, wasserstein_1, Binning, EmpiricalMeasure, ObservableHistogram};
pub use observable::Observable;
pub use steering::{
    control_drift, irreducibility_report, pilot_threshold, steering_experiment, IrreducibilityReport, ReachStatus, SteeringPlan,
    SteeringResult,
};
