//! Simulation settings with closed-form oracles, the replicated simulation
//! study, and policy-class characterization with CSV/JSON/SVG export.

pub mod dgp;
pub mod oracle;
pub mod study;
pub mod surface;
pub mod svg;

pub use dgp::{generate_dataset, DgpSpec, PROPENSITY};
pub use oracle::{grid_optimum, oracle_value, oracle_value_quadrature, OracleMethod, OracleValue};
pub use study::{run_cell, run_simulation_study, RunResult, RunSummary, StudyCell, StudyConfig};
pub use surface::{
    characterize_policy_class, export_grid, level_of, read_grid_csv, surrogate_norms, GridSidecar, SurfaceGrid,
    LEVEL_WIDTH,
};
pub use svg::{render_contour_svg, SvgStyle, ViewportMap};
