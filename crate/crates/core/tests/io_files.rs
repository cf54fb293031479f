use mpgmres::gen::{generate, StencilSpec};
use mpgmres::io::{
    load_matrix_market, load_run_config, load_vector, parse_run_config, write_matrix_market, write_vector, PrecondSpec,
};
use mpgmres::SolverKind;

#[test]
fn generated_matrices_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for spec in ["laplace2d:7", "laplace3d:4", "convdiff2d:6", "stretched2d:5", "star2d:6", "biharmonic2d:6"] {
        let a = generate(&spec.parse::<StencilSpec>().unwrap()).unwrap();
        let path = dir.path().join(format!("{}.mtx", spec.replace(':', "_")));
        write_matrix_market(&a, &path).unwrap();
        let back = load_matrix_market(&path).unwrap();
        assert_eq!(back, a, "{spec}");
    }
}

#[test]
fn vector_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.mtx");
    let x = vec![1.5, -2.25e-7, 3.0e12, 0.0];
    write_vector(&x, &path).unwrap();
    assert_eq!(load_vector(&path).unwrap().as_slice(), &x[..]);
}

#[test]
fn config_file_drives_a_run_description() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# ir run\ngen=laplace2d:20 solver=ir m=25\ntol=1e-9 precond=poly:5 rcm=true\n").unwrap();
    let cfg = load_run_config(&path).unwrap();
    assert_eq!(cfg.solver, SolverKind::IR);
    assert_eq!(cfg.m, 25);
    assert_eq!(cfg.precond, PrecondSpec::Poly(5));
    assert!(cfg.rcm);
    let again = parse_run_config(&cfg.to_text()).unwrap();
    assert_eq!(again.to_text(), cfg.to_text());
}
