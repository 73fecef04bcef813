use vemopt_web::{check_jacobians, equilibrium_residual, solve_config};

#[test]
fn short_solve_returns_histories() {
    let text = "problem = \"double_integrator\"\nnodes = 21\nx_guess = [0.5, 0.5]\ntau_max = 2.0\n";
    let run = solve_config(text).unwrap_or_else(|_| panic!("solve failed"));
    assert_eq!(run.tau().len(), 21);
    assert_eq!(run.t().len(), 21);
    assert_eq!(run.state(1).len(), 21);
    assert!(run.state(5).is_empty());
    assert_eq!(run.pi_eq().len(), 2);
    assert!(run.error().is_none());
    let v = run.lyapunov();
    assert!(v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)));
}

#[test]
fn jacobians_of_builtins_validate() {
    assert!(check_jacobians("double_integrator", None, 20).unwrap_or(1.0) < 1e-5);
    assert!(check_jacobians("brachistochrone", Some(-2.0), 20).unwrap_or(1.0) < 1e-5);
}

#[test]
fn residual_shrinks_with_refinement() {
    let coarse = equilibrium_residual(41).unwrap_or(f64::NAN);
    let fine = equilibrium_residual(81).unwrap_or(f64::NAN);
    assert!(coarse <= 5e-3 && fine <= 1.5e-3);
    assert!((coarse / fine - 4.0).abs() < 0.5);
}
