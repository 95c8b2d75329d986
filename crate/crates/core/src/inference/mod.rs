//! Early-exit inference: confidence criteria, exit policies, per-split
//! operating-point measurement, and budgeted calibration.

pub mod budget;
pub mod confidence;
pub mod policy;
pub mod table;

pub use budget::{
    calibrate_budgets, candidate_policies, standard_budgets, threshold_grid, Budget, BudgetReport,
    BudgetRow, PolicyFamily,
};
pub use confidence::{confidence, softmax_row, Criterion};
pub use policy::{decide_exit, decide_from_cached, ExitPolicy, Prediction};
pub use table::{
    build_exit_table, evaluate_operating_point, operating_point_from_table, ExitTable,
    OperatingPoint,
};
