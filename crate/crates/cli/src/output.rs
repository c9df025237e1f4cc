//! CSV, legacy VTK and summary writers.

use std::io::Write;
use std::path::Path;

use sdfem::mesh::{Region, TriMesh};
use sdfem::solver::FieldState;
use sdfem::spaces::Spaces;
use sdfem::verification::{rt0_cell_averages, ConvergenceRow};

pub const CONVERGENCE_HEADER: &str =
    "h,tau,err_uf_L2,rate_uf,err_up_L2,rate_up,err_phi_L2,rate_phi,wall_s";
pub const RITZ_HEADER: &str = "h,err_uf_L2,rate_uf,err_up_L2,rate_up,err_phi_L2,rate_phi,wall_s";

fn fmt_rate(prev: Option<f64>, curr: f64) -> String {
    match prev {
        Some(p) => format!("{:.3}", (p / curr).log2()),
        None => String::new(),
    }
}

/// Render completed convergence rows; on failure append the machine-readable
/// comment naming the level.
pub fn render_convergence_csv(rows: &[ConvergenceRow], failed_at: Option<f64>) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    let mut prev: Option<&ConvergenceRow> = None;
    for row in rows {
        out.push_str(&format!(
            "{},{},{:.12e},{},{:.12e},{},{:.12e},{},{:.3}\n",
            row.h,
            row.tau,
            row.err_uf,
            fmt_rate(prev.map(|p| p.err_uf), row.err_uf),
            row.err_up,
            fmt_rate(prev.map(|p| p.err_up), row.err_up),
            row.err_phi,
            fmt_rate(prev.map(|p| p.err_phi), row.err_phi),
            row.wall_s,
        ));
        prev = Some(row);
    }
    if let Some(h) = failed_at {
        out.push_str(&format!("# FAILED at h={h}\n"));
    }
    out
}

/// Rows of a steady projection rate study.
pub struct RitzRow {
    pub h: f64,
    pub err_uf: f64,
    pub err_up: f64,
    pub err_phi: f64,
    pub wall_s: f64,
}

pub fn render_ritz_csv(rows: &[RitzRow]) -> String {
    let mut out = String::from(RITZ_HEADER);
    out.push('\n');
    let mut prev: Option<&RitzRow> = None;
    for row in rows {
        out.push_str(&format!(
            "{},{:.12e},{},{:.12e},{},{:.12e},{},{:.3}\n",
            row.h,
            row.err_uf,
            fmt_rate(prev.map(|p| p.err_uf), row.err_uf),
            row.err_up,
            fmt_rate(prev.map(|p| p.err_up), row.err_up),
            row.err_phi,
            fmt_rate(prev.map(|p| p.err_phi), row.err_phi),
            row.wall_s,
        ));
        prev = Some(row);
    }
    out
}

/// Legacy ASCII VTK unstructured grid: point data for the fluid velocity
/// (zero outside the fluid region) and pressure, cell data for the porous
/// pressure, region tag and cell-averaged porous velocity.
pub fn render_vtk(mesh: &TriMesh, spaces: &Spaces, state: &FieldState) -> String {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\n");
    out.push_str("coupled flow fields\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {} double\n", mesh.n_vertices()));
    for v in &mesh.vertices {
        out.push_str(&format!("{} {} 0\n", v[0], v[1]));
    }
    out.push_str(&format!(
        "CELLS {} {}\n",
        mesh.n_triangles(),
        4 * mesh.n_triangles()
    ));
    for tri in &mesh.triangles {
        out.push_str(&format!("3 {} {} {}\n", tri[0], tri[1], tri[2]));
    }
    out.push_str(&format!("CELL_TYPES {}\n", mesh.n_triangles()));
    for _ in 0..mesh.n_triangles() {
        out.push_str("5\n");
    }

    out.push_str(&format!("POINT_DATA {}\n", mesh.n_vertices()));
    out.push_str("VECTORS u_f double\n");
    for v in 0..mesh.n_vertices() {
        if spaces.stokes_vel.is_fluid_vertex(v) {
            let ux = state.u_f[spaces.stokes_vel.vertex_dof(v, 0)];
            let uy = state.u_f[spaces.stokes_vel.vertex_dof(v, 1)];
            out.push_str(&format!("{ux} {uy} 0\n"));
        } else {
            out.push_str("0 0 0\n");
        }
    }
    out.push_str("SCALARS p_f double 1\nLOOKUP_TABLE default\n");
    for v in 0..mesh.n_vertices() {
        if spaces.stokes_vel.is_fluid_vertex(v) {
            out.push_str(&format!("{}\n", state.p_f[spaces.stokes_pr.vertex_dof(v)]));
        } else {
            out.push_str("0\n");
        }
    }

    out.push_str(&format!("CELL_DATA {}\n", mesh.n_triangles()));
    out.push_str("SCALARS phi_p double 1\nLOOKUP_TABLE default\n");
    for t in 0..mesh.n_triangles() {
        match mesh.triangle_region[t] {
            Region::Porous => out.push_str(&format!(
                "{}\n",
                state.phi_p[spaces.darcy_pr.tri_dof(t)]
            )),
            Region::Fluid => out.push_str("0\n"),
        }
    }
    out.push_str("SCALARS region int 1\nLOOKUP_TABLE default\n");
    for t in 0..mesh.n_triangles() {
        out.push_str(match mesh.triangle_region[t] {
            Region::Fluid => "0\n",
            Region::Porous => "1\n",
        });
    }
    out.push_str("VECTORS u_p double\n");
    let averages = rt0_cell_averages(mesh, &spaces.darcy_vel, &state.u_p);
    let mut porous_index = 0usize;
    for t in 0..mesh.n_triangles() {
        match mesh.triangle_region[t] {
            Region::Porous => {
                let u = averages[porous_index];
                porous_index += 1;
                out.push_str(&format!("{} {} 0\n", u[0], u[1]));
            }
            Region::Fluid => out.push_str("0 0 0\n"),
        }
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(contents.as_bytes())
}
