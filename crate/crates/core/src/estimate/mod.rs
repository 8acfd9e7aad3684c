//! Estimators for survival and cumulative-incidence estimands.

pub mod aalen_johansen;
pub mod bootstrap;
pub mod design;
pub mod gcomp;
pub mod ipcw;
pub mod km;
pub mod linalg;
pub mod logistic;
pub mod node;
pub mod result;

pub use design::{CovariateSpec, Form, LHistory};
pub use km::{kaplan_meier, CurvePoint, SurvivalCurve};
pub use logistic::{fit_logistic, fit_logistic_offset, LogisticFit, LogisticOptions};
pub use result::{contrast, Diagnostics, EstimateResult, Scale};
pub use ipcw::{ipcw_curve, ipcw_survival, CensorModel, IpcwCurve, IpcwOptions};
pub use gcomp::{fit_cumulative_weights, seq_gcomp, targeted_update, CumulativeWeights, GcompFit, GcompProblem};
pub use aalen_johansen::{aalen_johansen, aalen_johansen_cif, CifCurve};
pub use bootstrap::{bootstrap_se, BootstrapSummary, Resample};
