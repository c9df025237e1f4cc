//! Property tests for the reference elements, assembly buffers and the
//! Dirichlet elimination.

use proptest::prelude::*;

use sdfem::fem::{bubble_value, p1_values, rt0_eval, TriangleGeometry};
use sdfem::sparse::{apply_dirichlet_rhs, constrain_matrix, Triplets};

/// A reference point strictly inside the unit triangle.
fn ref_point() -> impl Strategy<Value = [f64; 2]> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| {
        let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
        [a, b]
    })
}

/// A well-shaped CCW triangle with side lengths of order one.
fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    (
        -1.0..1.0f64,
        -1.0..1.0f64,
        0.3..2.0f64,
        -0.5..0.5f64,
        0.3..2.0f64,
    )
        .prop_map(|(x0, y0, base, skew, height)| {
            [
                [x0, y0],
                [x0 + base, y0],
                [x0 + skew, y0 + height],
            ]
        })
}

proptest! {
    #[test]
    fn p1_partition_of_unity(p in ref_point()) {
        let values = p1_values(p);
        let sum: f64 = values.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-14);
        for v in values {
            prop_assert!((-1e-14..=1.0 + 1e-14).contains(&v));
        }
    }

    #[test]
    fn bubble_vanishes_on_edges(s in 0.0..1.0f64, edge in 0usize..3) {
        let p = match edge {
            0 => [s, 0.0],
            1 => [1.0 - s, s],
            _ => [0.0, s],
        };
        prop_assert!(bubble_value(p).abs() < 1e-14);
    }

    #[test]
    fn rt0_reproduces_constants(verts in triangle(), vx in -2.0..2.0f64, vy in -2.0..2.0f64, p in ref_point()) {
        let geom = TriangleGeometry::new(verts).unwrap();
        // interpolate (vx, vy) through integrated edge fluxes with respect
        // to the outward normals (signs all +1 in local convention)
        let mut coeffs = [0.0; 3];
        for i in 0..3 {
            let a = verts[(i + 1) % 3];
            let b = verts[(i + 2) % 3];
            let e = [b[0] - a[0], b[1] - a[1]];
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            // CCW traversal: outward normal is the right normal
            let n_out = [e[1] / len, -e[0] / len];
            coeffs[i] = len * (vx * n_out[0] + vy * n_out[1]);
        }
        let x = geom.map(p);
        let (psi, _) = rt0_eval(&geom, [1, 1, 1], x);
        let mut value = [0.0, 0.0];
        for i in 0..3 {
            value[0] += coeffs[i] * psi[i][0];
            value[1] += coeffs[i] * psi[i][1];
        }
        prop_assert!((value[0] - vx).abs() < 1e-12, "{} vs {vx}", value[0]);
        prop_assert!((value[1] - vy).abs() < 1e-12, "{} vs {vy}", value[1]);
    }

    #[test]
    fn rt0_edge_fluxes_are_kronecker(verts in triangle()) {
        let geom = TriangleGeometry::new(verts).unwrap();
        // two-point Gauss on each edge integrates the linear trace exactly
        let gauss = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
        for j in 0..3 {
            let a = verts[(j + 1) % 3];
            let b = verts[(j + 2) % 3];
            let e = [b[0] - a[0], b[1] - a[1]];
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            let n_out = [e[1] / len, -e[0] / len];
            for i in 0..3 {
                let mut flux = 0.0;
                for s in gauss {
                    let x = [a[0] + e[0] * s, a[1] + e[1] * s];
                    let (psi, _) = rt0_eval(&geom, [1, 1, 1], x);
                    flux += 0.5 * len * (psi[i][0] * n_out[0] + psi[i][1] * n_out[1]);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((flux - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn triplet_compression_matches_dense(entries in prop::collection::vec((0usize..6, 0usize..6, -5.0..5.0f64), 0..40)) {
        let mut trip = Triplets::new(6, 6);
        let mut dense = vec![vec![0.0; 6]; 6];
        for &(r, c, v) in &entries {
            trip.push(r, c, v);
            dense[r][c] += v;
        }
        let csr = trip.to_csr();
        for r in 0..6 {
            for c in 0..6 {
                prop_assert!((csr.get(r, c) - dense[r][c]).abs() < 1e-12);
            }
        }
        // assembly is deterministic: a second compression is bit-identical
        let again = trip.to_csr();
        prop_assert!(csr == again);
    }

    #[test]
    fn dirichlet_elimination_properties(
        entries in prop::collection::vec((0usize..5, 0usize..5, -3.0..3.0f64), 5..25),
        dof in 0usize..5,
        value in -2.0..2.0f64,
    ) {
        let mut trip = Triplets::new(5, 5);
        for &(r, c, v) in &entries {
            trip.push(r, c, v);
        }
        for i in 0..5 {
            trip.push(i, i, 4.0); // keep rows meaningful
        }
        let matrix = trip.to_csr();
        let constrained = constrain_matrix(&matrix, &[dof]);
        // idempotent
        let twice = constrain_matrix(&constrained, &[dof]);
        prop_assert!(constrained.max_abs_diff(&twice) == 0.0);
        // rhs treatment matches dense elimination
        let mut rhs = vec![1.0; 5];
        apply_dirichlet_rhs(&matrix, &mut rhs, &[dof], &[value]);
        for r in 0..5 {
            if r == dof {
                prop_assert!(rhs[r] == value);
            } else {
                let expect = 1.0 - matrix.get(r, dof) * value;
                prop_assert!((rhs[r] - expect).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn random_spd_solve_matches_dense_oracle() {
    // deterministic 50x50 SPD system: M^T M + 50 I
    let n = 50;
    let mut seed = 42u64;
    let mut rand = || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (seed >> 33) as f64 / (1u64 << 31) as f64 - 0.5
    };
    let m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rand()).collect()).collect();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                a[i][j] += m[k][i] * m[k][j];
            }
        }
        a[i][i] += n as f64;
    }
    let b: Vec<f64> = (0..n).map(|_| rand()).collect();

    let mut trip = Triplets::new(n, n);
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            trip.push(i, j, v);
        }
    }
    let system = sdfem::sparse::SparseSystem::new(
        trip.to_csr(),
        b.clone(),
        sdfem::sparse::BlockLayout::new(&[("x", n)]),
    )
    .unwrap();
    let sparse = sdfem::sparse_solve(&system).unwrap();
    let dense = dense_gauss(a, b);
    let worst = sparse
        .iter()
        .zip(&dense)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    assert!(worst <= 1e-8, "max difference {worst}");
}

fn dense_gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

#[test]
fn essential_values_reproduced_after_solve() {
    // a constrained solve pins the boundary dofs exactly
    use sdfem::mesh::DomainSpec;
    use sdfem::solver::{build_scheme, darcy_step, FieldState};
    use sdfem::spaces::{build_spaces, BoundaryData};
    use sdfem::verification::{SmoothCase, ManufacturedSolution};
    use sdfem::ModelParams;

    let mesh = sdfem::build_structured_mesh(&DomainSpec::benchmark(), 4).unwrap();
    let spaces = build_spaces(&mesh).unwrap();
    let params = ModelParams::unit();
    let case = SmoothCase::new(params);
    let data = case.boundary_data();
    let ops = build_scheme(&mesh, &spaces, &params, 0.1, 6, 6).unwrap();
    let state = FieldState {
        t: 0.0,
        u_f: vec![0.0; spaces.stokes_vel.ndofs()],
        p_f: vec![0.0; spaces.stokes_pr.ndofs()],
        u_p: vec![0.0; spaces.darcy_vel.ndofs()],
        phi_p: vec![0.0; spaces.darcy_pr.ndofs()],
    };
    let loads = sdfem::assembly::assemble_loads(
        &mesh,
        &spaces,
        &params,
        &case,
        &data,
        0.1,
        &ops.vol_quad,
        &ops.edge_quad,
    )
    .unwrap();
    let (u_p, _) = darcy_step(&mesh, &spaces, &ops, &params, &state, 0.1, &loads, &data).unwrap();
    let expect =
        sdfem::spaces::darcy_essential_values(&mesh, &spaces.darcy_vel, &data, 0.1, &ops.edge_quad);
    for (&dof, &value) in spaces.darcy_vel.essential_dofs.iter().zip(&expect) {
        assert_eq!(u_p[dof], value);
    }

    let zero = BoundaryData::homogeneous();
    let (u_p0, _) = darcy_step(&mesh, &spaces, &ops, &params, &state, 0.1, &loads, &zero).unwrap();
    for &dof in &spaces.darcy_vel.essential_dofs {
        assert_eq!(u_p0[dof], 0.0);
    }
}
