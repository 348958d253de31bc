//! Equal-area sphere partitions, cell histograms, distances between laws,
//! windowed state fingerprints and the Aizenman–Wehr cell masses.

mod aw;
mod distance;
mod fingerprint;
mod partition;

pub use aw::{approximate_by_atoms, aw_density, aw_density_cells, sphere_area, AtomicMeasure};
pub use distance::{bl_distance_1d, ks_statistic, product_bl_upper_bound, total_variation, EmpiricalLaw1D};
pub use fingerprint::{fingerprint_state, gibbs_window, WindowFingerprint};
pub use partition::{cell_histogram, cell_histogram_lenient, eq_partition, Cell, CellHistogram, SpherePartition};
