use std::sync::Arc;

use biharm_core::experiment::structured_meshes;
use biharm_core::problems;
use biharm_core::{run_convergence, solve_on_mesh, Error, Mesh, SolveParams, Stage};

#[test]
fn failures_name_their_stage() {
    let star = problems::example4();
    let mesh = Arc::new(Mesh::structured(star.domain, 20).unwrap());
    let err = solve_on_mesh(&star, mesh, &SolveParams::new(2)).unwrap_err();
    assert_eq!(err.stage, Stage::Classify);
    assert!(matches!(err.error, Error::AssumptionViolation { .. }));

    let p = problems::example1();
    let mesh = Arc::new(Mesh::structured(p.domain, 10).unwrap());
    let params = SolveParams {
        eta: Some(1e-6),
        ..SolveParams::new(3)
    };
    let err = solve_on_mesh(&p, mesh.clone(), &params).unwrap_err();
    assert_eq!(err.stage, Stage::Solve);
    assert!(matches!(err.error, Error::NotPositiveDefinite { .. }));

    let params = SolveParams {
        patch_size: Some(3),
        ..SolveParams::new(2)
    };
    let err = solve_on_mesh(&p, mesh, &params).unwrap_err();
    assert_eq!(err.stage, Stage::Reconstruct);
    assert!(matches!(err.error, Error::PatchTooSmall { .. }));
}

#[test]
fn convergence_table_csv() {
    let p = problems::example2();
    let meshes = structured_meshes(&p, &[8, 16]).unwrap();
    let mut seen = 0;
    let table = run_convergence(&p, meshes, &SolveParams::new(2), |out| {
        seen += 1;
        assert!(out.galerkin_residual < 1e-9);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, 2);
    let csv = table.to_csv_string().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].split(',').nth(5).unwrap().is_empty());
    assert!(!lines[2].split(',').nth(5).unwrap().is_empty());
    assert!(table.rows[1].report.energy_error < table.rows[0].report.energy_error);
}
