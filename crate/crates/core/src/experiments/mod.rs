//! Monte Carlo campaigns built on the coupled engine, and the path
//! functionals they measure.

pub mod checks;
pub mod clt;
pub mod entrance;
pub mod functionals;
pub mod martingale;
pub mod runner;
pub mod supdev;

pub use entrance::{simulate_from_entrance, EntranceKind, EntranceLaw};
pub use functionals::{
    decomposition_residual, l_eps_compensator, martingale_path, residual_path, scan_path,
    scan_path_with, sup_deviation, sup_x_minus_y, x_eps_path, y_identity_residual, y_paths,
    FunctionalKind, PathFunctional, ScanMode, Snapshot,
};
pub use runner::run_replicates;
