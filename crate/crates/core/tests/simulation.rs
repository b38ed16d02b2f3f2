use mas_core::grid::total_variation;
use mas_core::{run, run_with_observer, Config32, Config64, Mesh, Problem32, Problem64, SchemeKind};

fn problems() -> [(&'static str, Problem64); 2] {
    [
        ("transport", Problem64::transport(0.3, 0.3).unwrap()),
        ("burgers", Problem64::burgers(0.3, 0.3).unwrap()),
    ]
}

#[test]
fn adaptive_runs_stay_inside_the_tv_envelope() {
    for (name, prob) in problems() {
        for scheme in SchemeKind::ALL {
            for cfl in [0.3, 0.5] {
                let cfg = Config64::new(scheme, 100, cfl, 0.3, true);
                let c = cfg.evolution_constant();
                let out = run(&cfg, &prob).unwrap_or_else(|e| panic!("{name}/{scheme}: {e}"));
                assert!(out.final_solution.values().iter().all(|v| v.is_finite()));
                for rec in &out.history {
                    let envelope = rec.tv_envelope(out.tv0, c).unwrap();
                    assert!(rec.tv <= envelope, "{name}/{scheme} step {}: {} > {envelope}", rec.step, rec.tv);
                    assert!(rec.lambda_report.max_a < 1.0);
                    assert!(rec.tv >= 0.0 && rec.evolution_ratio >= 0.0);
                }
                assert_eq!(out.history.last().unwrap().time, 0.3);
            }
        }
    }
}

#[test]
fn fixed_mesh_runs_never_move_nodes() {
    let prob = Problem64::transport(0.3, 0.1).unwrap();
    let cfg = Config64::new(SchemeKind::RichtmyerLW, 60, 0.5, 0.1, false);
    let uniform = Mesh::<f64>::uniform(0.0, 1.0, 60).unwrap();
    let mut steps = 0;
    run_with_observer(&cfg, &prob, |rec, u| {
        steps += 1;
        assert_eq!(u.mesh(), &uniform);
        assert_eq!(rec.lambda_report.a_values.len(), 0);
    })
    .unwrap();
    assert!(steps > 0);
}

#[test]
fn uniform_ftcs_burgers_diverges() {
    let prob = Problem64::burgers(0.3, 0.3).unwrap();
    let cfg = Config64::new(SchemeKind::Ftcs, 200, 0.5, 0.3, false);
    match run(&cfg, &prob) {
        Err(mas_core::MasError::BlowUp { step }) => assert!(step > 1),
        Ok(out) => assert!(total_variation(&out.final_solution) > 10.0 * out.tv0),
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn single_precision_run() {
    let prob = Problem32::burgers(0.3, 0.1).unwrap();
    let cfg = Config32::new(SchemeKind::MacCormack, 80, 0.5, 0.1, true);
    let out = run(&cfg, &prob).unwrap();
    assert!(out.final_solution.values().iter().all(|v| v.is_finite()));
    assert!(total_variation(&out.final_solution) <= out.tv0 + 0.05);
}

#[test]
fn every_remesh_clips_old_extremes() {
    use mas_core::remesh::{extreme_clipping, remesh_step};
    use mas_core::schemes::{choose_dt, step};
    use mas_core::StepContext;

    for scheme in SchemeKind::ALL {
        let prob = Problem64::burgers(0.3, 0.3).unwrap();
        let cfg = Config64::new(scheme, 100, 0.5, 0.3, true);
        let lam = cfg.lambda_rule().unwrap();
        let mut u = mas_core::driver::initial_solution(&cfg, &prob).unwrap();
        let mut clips = 0;
        for _ in 0..300 {
            let remeshed = remesh_step(&u, &cfg.estimator, &lam).unwrap().solution;
            for clip in extreme_clipping(&u, &remeshed) {
                assert!(clip.holds(1e-12), "{scheme}: {clip:?}");
                clips += 1;
            }
            let dt = choose_dt(&remeshed, &prob, cfg.cfl);
            let ctx = StepContext::new(&remeshed, dt, cfg.cfl).unwrap();
            u = step(scheme, &remeshed, &ctx, &prob).unwrap();
        }
        assert!(clips > 0, "{scheme}: no extremes observed");
    }
}
