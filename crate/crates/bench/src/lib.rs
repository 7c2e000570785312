//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use nemslab_core::domain::{extrude, make_domain, power_law_datum, BoundaryDatum, Domain2D, DomainKind, Grid3D};
use nemslab_core::field::{random_admissible, DirectorField};

pub fn disk_domain(res: usize) -> Arc<Domain2D> {
    make_domain(DomainKind::Disk { radius: 1.0 }, res, res).unwrap()
}

pub fn disk_grid(res: usize, layers: usize) -> Arc<Grid3D> {
    Arc::new(extrude(&disk_domain(res), layers).unwrap())
}

pub fn fixture_field(res: usize, layers: usize, degree: i32) -> (Arc<Grid3D>, BoundaryDatum, DirectorField) {
    let grid = disk_grid(res, layers);
    let g = power_law_datum(&grid.domain, degree);
    let u = random_admissible(&grid, &g, 42, 0.3, 2);
    (grid, g, u)
}
