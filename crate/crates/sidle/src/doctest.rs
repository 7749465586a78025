//! Compiles and runs every code block in the guide, so the book can
//! never drift from the crate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub struct Introduction;

#[doc = include_str!("../../../book/src/getting-started.md")]
pub struct GettingStarted;

#[doc = include_str!("../../../book/src/occupancy-maps.md")]
pub struct OccupancyMaps;

#[doc = include_str!("../../../book/src/whole-body-geometry.md")]
pub struct WholeBodyGeometry;

#[doc = include_str!("../../../book/src/kinodynamic-search.md")]
pub struct KinodynamicSearch;

#[doc = include_str!("../../../book/src/flight-corridors.md")]
pub struct FlightCorridors;

#[doc = include_str!("../../../book/src/quintic-trajectories.md")]
pub struct QuinticTrajectories;

#[doc = include_str!("../../../book/src/trajectory-optimization.md")]
pub struct TrajectoryOptimization;

#[doc = include_str!("../../../book/src/metrics-and-tools.md")]
pub struct MetricsAndTools;
