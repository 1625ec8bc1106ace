//! Figure generation: convex-hull geometry, model-warped meshgrids, and the
//! deterministic SVG comparison figure with CSV sidecars.

mod geometry;
mod meshgrid;
mod svg;

pub use geometry::{convex_hull, point_in_polygon, Polygon2D};
pub use meshgrid::{data_meshgrid, latent_meshgrid, meshgrid_through, MeshGrid, MeshPoint};
pub use svg::{render_figure, FigureStyle, PanelColumn};
