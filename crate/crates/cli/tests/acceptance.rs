//! Acceptance suite: one test per shipping criterion. Each test prints a
//! single `acceptance NN <label>: pass` line on success (the harness
//! reports the failure line otherwise) and enforces its time budget.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use presymp_core::canonical::{
    find_valence, kernel_invariance_check, reduced_ranks, standard_symplectic, valence_check,
    TransformationPair, Valence,
};
use presymp_core::constraints::dirac::dirac_run;
use presymp_core::constraints::lagrangian::{lagrangian_pca, sode_run, SodeRun};
use presymp_core::constraints::{
    poisson_bracket, ConstraintChain, Klass, MultiplierValue, Origin, WeakOutcome,
};
use presymp_core::evolution::{apply_k, build_k, generation_shift_check, verify_k, KOperator};
use presymp_core::expr::{big, big_ratio, parse, Polynomial, RationalExpr, VarTable};
use presymp_core::legendre::{legendre, LegendreData};
use presymp_core::linalg::{self, sample_rank_check, RfMatrix};
use presymp_core::mechanics::{build_system, fl_projectable, LagrangianSystem};
use presymp_core::presymplectic::PcaResult;
use presymp_core::sampling;
use presymp_core::EngineSettings;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const RELATIVE_MOTION: &str = "(1/2)*(v1 - v2)^2";
const VELOCITY_COUPLING: &str = "(1/2)*v1^2 + q1*v2";
const AFFINE_SHIFT: &str = "(1/2)*(v1 - q2)^2";
const REGULAR: &str = "(1/2)*(v1^2 + v2^2) - q1^2";

fn pass(n: u32, label: &str, start: Instant, budget: Option<Duration>) {
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        assert!(
            elapsed <= b,
            "acceptance {n:02} {label}: exceeded time budget ({elapsed:?} > {b:?})"
        );
    }
    println!("acceptance {n:02} {label}: pass ({} ms)", elapsed.as_millis());
}

struct Pipeline {
    sys: LagrangianSystem,
    ld: LegendreData,
    ham: ConstraintChain,
    sode: SodeRun,
    pca: PcaResult,
    k: KOperator,
}

fn pipeline(l: &str, settings: &EngineSettings) -> Pipeline {
    let t = VarTable::for_lagrangian(2, &[]).unwrap();
    let lag = parse(l, &t).unwrap();
    let sys = build_system(&t, &lag).unwrap();
    let ld = legendre(&sys, settings).unwrap();
    let ham = dirac_run(&ld, settings).unwrap();
    let sode = sode_run(&sys, settings).unwrap();
    let pca = lagrangian_pca(&sys, settings).unwrap();
    let k = build_k(&sys);
    Pipeline {
        sys,
        ld,
        ham,
        sode,
        pca,
        k,
    }
}

#[test]
fn criterion_01_regular_system_is_unconstrained_and_verified() {
    let start = Instant::now();
    let settings = EngineSettings::default();
    let p = pipeline(REGULAR, &settings);
    assert!(p.ham.is_empty() && p.ham.stabilized);
    assert!(p.sode.chain.is_empty() && p.sode.chain.stabilized);
    assert!(p.pca.chain.is_empty() && p.pca.chain.stabilized);
    assert!(
        p.sode.kernel.is_empty(),
        "second-order vector field must be unique"
    );
    let report = verify_k(&p.sys, &p.ld, &p.k).unwrap();
    assert!(report.ok(), "evolution-operator identities failed");
    pass(
        1,
        "regular system: empty chains, unique second-order field, evolution verified",
        start,
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_02_relative_motion_first_class_chain_and_reduction() {
    let start = Instant::now();
    let settings = EngineSettings::default();
    let p = pipeline(RELATIVE_MOTION, &settings);

    assert_eq!(p.ham.len(), 1);
    let c = p.ham.all().next().unwrap();
    assert!(c.expr.same_repr(&parse("p1 + p2", &p.ld.table).unwrap()));
    assert_eq!((c.generation, c.klass), (1, Klass::First));
    assert!(p.sode.chain.is_empty());

    let t = VarTable::chart(&["q1", "q2", "p1", "p2"]).unwrap();
    let omega = standard_symplectic(&t, 2);
    let constraints = vec![parse("p1 + p2", &t).unwrap()];
    let report = reduced_ranks(&t, &[0, 1, 2, 3], &constraints, &omega, &settings).unwrap();
    assert_eq!(report.dim_reduced, 2, "reduced phase space must be 2d");
    assert_eq!(report.numeric_consistent, Some(true));
    pass(
        2,
        "relative motion: single first-class constraint, 2d reduced space",
        start,
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_03_velocity_coupling_second_class_chains() {
    let start = Instant::now();
    let settings = EngineSettings::default();
    let p = pipeline(VELOCITY_COUPLING, &settings);

    let hams: Vec<_> = p.ham.all().collect();
    assert_eq!(hams.len(), 2);
    assert!(hams[0].expr.same_repr(&parse("p2 - q1", &p.ld.table).unwrap()));
    assert_eq!((hams[0].generation, hams[0].klass), (1, Klass::Second));
    assert!(hams[1].expr.same_repr(&parse("p1", &p.ld.table).unwrap()));
    assert_eq!((hams[1].generation, hams[1].klass), (2, Klass::Second));
    assert!(matches!(
        p.ham.multipliers[0].value,
        MultiplierValue::Fixed(ref v) if v.is_zero()
    ));

    let sodes: Vec<_> = p.sode.chain.all().collect();
    assert_eq!(sodes.len(), 2);
    // The generation-2 constraint is dynamical and equals the pulled-back
    // momentum constraint in its normalized form; the generation-3 one is a
    // second-order-condition constraint equal to v2.
    assert_eq!((sodes[0].generation, sodes[0].origin), (2, Origin::Dynamical));
    let pulled = p
        .ld
        .pullback(&parse("p1", &p.ld.table).unwrap())
        .unwrap()
        .restrict_to(&p.sys.table)
        .unwrap();
    assert!(sodes[0].expr.same_repr(&pulled.constraint_form()));
    assert_eq!((sodes[1].generation, sodes[1].origin), (3, Origin::Sode));
    assert!(sodes[1].expr.same_repr(&parse("v2", &p.sys.table).unwrap()));
    assert!(fl_projectable(&p.sys, &sodes[0].expr).projectable);
    assert!(!fl_projectable(&p.sys, &sodes[1].expr).projectable);
    pass(
        3,
        "velocity coupling: second-class pair, fixed multiplier, tagged chain",
        start,
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_04_affine_shift_first_class_chain_and_evolution_images() {
    let start = Instant::now();
    let settings = EngineSettings::default();
    let p = pipeline(AFFINE_SHIFT, &settings);

    let hams: Vec<_> = p.ham.all().collect();
    assert_eq!(hams.len(), 2);
    assert!(hams[0].expr.same_repr(&parse("p2", &p.ld.table).unwrap()));
    assert_eq!((hams[0].generation, hams[0].klass), (1, Klass::First));
    assert!(hams[1].expr.same_repr(&parse("p1", &p.ld.table).unwrap()));
    assert_eq!((hams[1].generation, hams[1].klass), (2, Klass::First));
    assert!(matches!(p.ham.multipliers[0].value, MultiplierValue::Free));

    // One dynamical constraint (stored sign-normalized as v1 - q2) and no
    // second-order-condition constraints.
    let sodes: Vec<_> = p.sode.chain.all().collect();
    assert_eq!(sodes.len(), 1);
    assert_eq!((sodes[0].generation, sodes[0].origin), (2, Origin::Dynamical));
    assert!(sodes[0]
        .expr
        .same_repr(&parse("v1 - q2", &p.sys.table).unwrap()));

    let img = apply_k(&p.k, &p.ld, &parse("p2", &p.ld.table).unwrap()).unwrap();
    assert!(img.same_repr(&parse("-(v1 - q2)", &p.sys.table).unwrap()));
    let img = apply_k(&p.k, &p.ld, &parse("p1", &p.ld.table).unwrap()).unwrap();
    assert!(img.is_zero());
    pass(
        4,
        "affine shift: first-class pair, free multiplier, evolution images",
        start,
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_05_generation_shift_on_both_singular_fixtures() {
    let start = Instant::now();
    let settings = EngineSettings {
        trials: 20,
        seed: 0,
        ..EngineSettings::default()
    };
    for l in [VELOCITY_COUPLING, AFFINE_SHIFT] {
        let p = pipeline(l, &settings);
        let records =
            generation_shift_check(&p.sys, &p.k, &p.ld, &p.ham, &p.sode.chain, &settings).unwrap();
        assert_eq!(records.len(), p.ham.len());
        for r in &records {
            assert!(
                matches!(r.outcome, WeakOutcome::Holds),
                "{l}: evolution image of {} (generation {}) not weakly contained \
                 through generation {}",
                r.name,
                r.ham_generation,
                r.tested_generations
            );
        }
    }
    pass(
        5,
        "generation shift: evolution maps generation i into generation i+1",
        start,
        Some(Duration::from_secs(2)),
    );
}

fn random_affine(
    t: &Arc<VarTable>,
    q: &[RationalExpr],
    rng: &mut ChaCha8Rng,
) -> RationalExpr {
    let mut e = RationalExpr::from_int(t, rng.gen_range(-2i64..=2));
    for qa in q {
        e = e.add(&qa.mul(&RationalExpr::from_int(t, rng.gen_range(-2i64..=2))));
    }
    e
}

/// A random velocity-quadratic Lagrangian with a constant-rank Hessian:
/// W(q) = U(q)^T D U(q) with D a constant diagonal matrix (zeros allowed)
/// and U unit upper triangular with affine entries, so all coefficient
/// polynomials have degree <= 2 and the kernel dimension never jumps.
fn random_quadratic_lagrangian(
    t: &Arc<VarTable>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> RationalExpr {
    let q: Vec<RationalExpr> = (0..n)
        .map(|a| RationalExpr::var(t, t.position(a)))
        .collect();
    let v: Vec<RationalExpr> = (0..n)
        .map(|a| RationalExpr::var(t, t.velocity(a)))
        .collect();
    let mut u = vec![vec![RationalExpr::zero(t); n]; n];
    for i in 0..n {
        u[i][i] = RationalExpr::one(t);
        for j in i + 1..n {
            u[i][j] = random_affine(t, &q, rng);
        }
    }
    let diag: Vec<i64> = (0..n).map(|_| rng.gen_range(-2i64..=2)).collect();
    let mut l = RationalExpr::zero(t);
    for i in 0..n {
        for j in 0..n {
            let mut w_ij = RationalExpr::zero(t);
            for (k, &d) in diag.iter().enumerate() {
                w_ij = w_ij.add(&u[k][i].mul(&u[k][j]).mul(&RationalExpr::from_int(t, d)));
            }
            l = l.add(
                &w_ij
                    .mul(&v[i])
                    .mul(&v[j])
                    .mul(&RationalExpr::from_constant(t, big_ratio(1, 2))),
            );
        }
    }
    for va in &v {
        l = l.add(&random_affine(t, &q, rng).mul(va));
    }
    // A random quadratic potential.
    let mut pot = RationalExpr::from_int(t, rng.gen_range(-3i64..=3));
    for qa in &q {
        pot = pot.add(&qa.mul(&RationalExpr::from_int(t, rng.gen_range(-3i64..=3))));
        for qb in &q {
            pot = pot.add(
                &qa.mul(qb)
                    .mul(&RationalExpr::from_int(t, rng.gen_range(-3i64..=3))),
            );
        }
    }
    l.sub(&pot)
}

#[test]
fn criterion_06_evolution_identities_on_random_lagrangians() {
    let start = Instant::now();
    let settings = EngineSettings::default();
    let mut rng = sampling::rng_from_seed(6);
    for case in 0..50 {
        let n = rng.gen_range(1..=3usize);
        let t = VarTable::for_lagrangian(n, &[]).unwrap();
        let lag = random_quadratic_lagrangian(&t, n, &mut rng);
        let sys = build_system(&t, &lag).unwrap();
        let ld = legendre(&sys, &settings)
            .unwrap_or_else(|e| panic!("case {case}: fiber derivative failed for L = {lag}: {e}"));
        let k = build_k(&sys);
        let report = verify_k(&sys, &ld, &k).unwrap();
        assert!(report.ok(), "case {case}: identities failed for L = {lag}");
        for group in [
            &report.structural,
            &report.dynamical_q,
            &report.dynamical_v,
            &report.sode,
        ] {
            for r in group {
                assert!(r.is_zero(), "case {case}: nonzero residual {r} for L = {lag}");
            }
        }
    }
    pass(
        6,
        "evolution identities exact on 50 random quadratic Lagrangians",
        start,
        Some(Duration::from_secs(30)),
    );
}

/// Phase-space chart with `n` degrees of freedom and its position/momentum
/// variable indices.
fn phase_table(n: usize) -> (Arc<VarTable>, Vec<usize>) {
    let base = VarTable::for_lagrangian(n, &[]).unwrap();
    let (ext, _) = base.extend_momenta().unwrap();
    let vars: Vec<usize> = (0..n)
        .map(|a| ext.position(a))
        .chain((0..n).map(|a| ext.momentum(a).unwrap()))
        .collect();
    (ext, vars)
}

/// A random polynomial: up to `max_terms` monomials of total degree
/// <= `max_deg` over `vars`, with small rational coefficients.
fn random_poly(
    t: &Arc<VarTable>,
    vars: &[usize],
    max_deg: u32,
    max_terms: usize,
    rng: &mut ChaCha8Rng,
) -> RationalExpr {
    let mut acc = RationalExpr::zero(t);
    for _ in 0..rng.gen_range(0..=max_terms) {
        let exps: Vec<u32> = (0..vars.len()).map(|_| rng.gen_range(0..=max_deg)).collect();
        if exps.iter().sum::<u32>() > max_deg {
            continue;
        }
        let c = big_ratio(rng.gen_range(-9i64..=9), rng.gen_range(1i64..=3));
        let mut m = RationalExpr::from_constant(t, c);
        for (&v, &e) in vars.iter().zip(&exps) {
            m = m.mul(&RationalExpr::var(t, v).pow_unsigned(e));
        }
        acc = acc.add(&m);
    }
    acc
}

#[test]
fn criterion_07_poisson_algebra_on_random_triples() {
    let start = Instant::now();
    let mut rng = sampling::rng_from_seed(7);
    for case in 0..100 {
        let n = rng.gen_range(1..=3usize);
        let (t, vars) = phase_table(n);
        let f = random_poly(&t, &vars, 3, 6, &mut rng);
        let g = random_poly(&t, &vars, 3, 6, &mut rng);
        let h = random_poly(&t, &vars, 3, 6, &mut rng);

        let fg = poisson_bracket(&t, &f, &g);
        let gf = poisson_bracket(&t, &g, &f);
        assert!(fg.add(&gf).is_zero(), "case {case}: antisymmetry failed");

        let jacobi = poisson_bracket(&t, &f, &poisson_bracket(&t, &g, &h))
            .add(&poisson_bracket(&t, &g, &poisson_bracket(&t, &h, &f)))
            .add(&poisson_bracket(&t, &h, &poisson_bracket(&t, &f, &g)));
        assert!(jacobi.is_zero(), "case {case}: Jacobi identity failed");
    }
    pass(
        7,
        "Poisson antisymmetry and Jacobi exact on 100 random triples",
        start,
        Some(Duration::from_secs(30)),
    );
}

/// Random rational-function matrix: polynomial numerators of degree <= 2
/// over three variables, with an occasional nonvanishing-pool denominator
/// so pole avoidance is exercised.
fn random_rf_matrix(
    t: &Arc<VarTable>,
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
) -> RfMatrix {
    let dens = ["1", "1", "1", "x1 + 2", "x2*x3 + 1"];
    RfMatrix::from_fn(t, rows, cols, |_, _| {
        let mut num = Polynomial::zero(t);
        for _ in 0..rng.gen_range(0..=4usize) {
            let mut m = Polynomial::constant(t, sampling::random_rational(rng));
            for _ in 0..rng.gen_range(0..=2u32) {
                let v = rng.gen_range(0..t.len());
                m = m.mul(&Polynomial::var(t, v));
            }
            num = num.add(&m);
        }
        let den = parse(dens[rng.gen_range(0..dens.len())], t).unwrap();
        RationalExpr::from_poly(num).div(&den).unwrap()
    })
}

#[test]
fn criterion_08_symbolic_rank_matches_numeric_rank_at_samples() {
    let start = Instant::now();
    let t = VarTable::chart(&["x1", "x2", "x3"]).unwrap();
    let mut rng = sampling::rng_from_seed(8);
    for case in 0..100 {
        let rows = rng.gen_range(1..=4usize);
        let cols = rng.gen_range(1..=4usize);
        let m = random_rf_matrix(&t, &mut rng, rows, cols);
        let symbolic = linalg::rank(&m);

        // Accumulate 10 clean sample points, resampling any batch that hit
        // the measure-zero rank-drop locus flagged by the checker.
        let mut clean = 0u32;
        let mut batches = 0;
        while clean < 10 {
            batches += 1;
            assert!(
                batches <= 10,
                "case {case}: rank drops are not measure-zero (symbolic rank {symbolic})"
            );
            let report = sample_rank_check(&m, 10, &mut rng);
            assert_eq!(report.generic_rank, symbolic);
            assert_eq!(report.trials, 10);
            clean += 10 - report.drops.len() as u32;
            for (point, dropped_rank) in &report.drops {
                assert!(*dropped_rank < symbolic);
                if let Some(det) = &report.vanishing_determinant {
                    let pt = point.iter().cloned().collect();
                    let value = det.eval(&pt).expect("drop point avoids poles");
                    assert!(
                        value == big(0),
                        "case {case}: determinant certificate nonzero at a drop point"
                    );
                }
            }
        }
    }
    pass(
        8,
        "symbolic rank equals sampled numeric rank on 100 random matrices",
        start,
        Some(Duration::from_secs(30)),
    );
}

fn final_surface_constraints(t: &Arc<VarTable>, l: &str) -> Vec<RationalExpr> {
    match l {
        RELATIVE_MOTION => vec![parse("p1 + p2", t).unwrap()],
        VELOCITY_COUPLING => vec![parse("p2 - q1", t).unwrap(), parse("p1", t).unwrap()],
        AFFINE_SHIFT => vec![parse("p2", t).unwrap(), parse("p1", t).unwrap()],
        REGULAR => Vec::new(),
        _ => unreachable!(),
    }
}

fn momentum_scaling(
    t: &Arc<VarTable>,
    k: i64,
    constraints: Vec<RationalExpr>,
    settings: &EngineSettings,
) -> TransformationPair {
    let omega = standard_symplectic(t, 2);
    TransformationPair::new(
        t,
        vec![0, 1, 2, 3],
        vec![
            parse("q1", t).unwrap(),
            parse("q2", t).unwrap(),
            parse(&format!("{k}*p1"), t).unwrap(),
            parse(&format!("{k}*p2"), t).unwrap(),
        ],
        omega.clone(),
        omega,
        constraints.clone(),
        constraints,
        settings,
    )
    .unwrap()
}

#[test]
fn criterion_09_valences_composition_and_kernel_invariance() {
    let start = Instant::now();
    let settings = EngineSettings::default();
    let t = VarTable::chart(&["q1", "q2", "p1", "p2"]).unwrap();

    // The identity has valence 1 on every fixture's final constraint surface.
    for l in [RELATIVE_MOTION, VELOCITY_COUPLING, AFFINE_SHIFT, REGULAR] {
        let tp = momentum_scaling(&t, 1, final_surface_constraints(&t, l), &settings);
        assert!(
            valence_check(&tp, &big(1), &settings).unwrap().ok,
            "{l}: identity valence 1 rejected"
        );
    }

    // Momentum doubling has valence 2 on the ambient chart and on the
    // relative-motion final surface, which it preserves.
    let ambient = momentum_scaling(&t, 2, Vec::new(), &settings);
    assert_eq!(
        find_valence(&ambient, &settings).unwrap(),
        Valence::Constant(big(2))
    );
    let surface = final_surface_constraints(&t, RELATIVE_MOTION);
    let restricted = momentum_scaling(&t, 2, surface.clone(), &settings);
    assert_eq!(
        find_valence(&restricted, &settings).unwrap(),
        Valence::Constant(big(2))
    );

    // Composition multiplies valences.
    let two = momentum_scaling(&t, 2, Vec::new(), &settings);
    let three = momentum_scaling(&t, 3, Vec::new(), &settings);
    let composed = three.compose(&two, &settings).unwrap();
    assert_eq!(
        find_valence(&composed, &settings).unwrap(),
        Valence::Constant(big(6))
    );

    // The restricted-form kernel is carried onto itself at surface samples.
    let report = kernel_invariance_check(&restricted, &settings).unwrap();
    assert_eq!(report.kernel_dim, 1);
    assert_eq!(report.samples_checked, 10);
    assert_eq!(report.ok, Some(true));
    for l in [RELATIVE_MOTION, VELOCITY_COUPLING, AFFINE_SHIFT, REGULAR] {
        let tp = momentum_scaling(&t, 1, final_surface_constraints(&t, l), &settings);
        let report = kernel_invariance_check(&tp, &settings).unwrap();
        assert_eq!(report.ok, Some(true), "{l}: kernel invariance failed");
    }
    pass(
        9,
        "valence search, composition, and kernel invariance",
        start,
        Some(Duration::from_secs(5)),
    );
}

#[test]
fn criterion_10_reports_are_byte_deterministic() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_presymp");
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems");
    let tmp = tempfile::tempdir().unwrap();
    for name in [
        "relative-motion.prob",
        "velocity-coupling.prob",
        "affine-shift.prob",
        "regular-oscillator.prob",
    ] {
        let file = dir.join(name);
        let run = |tag: &str| {
            let json = tmp.path().join(format!("{name}.{tag}.json"));
            let out = Command::new(bin)
                .arg("analyze")
                .arg("--seed")
                .arg("0")
                .arg("--json")
                .arg(&json)
                .arg(&file)
                .output()
                .unwrap();
            assert!(
                out.status.success(),
                "{name}: analyze failed: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            assert!(!out.stdout.is_empty());
            (out.stdout, std::fs::read(&json).unwrap())
        };
        let (text1, json1) = run("first");
        let (text2, json2) = run("second");
        assert_eq!(text1, text2, "{name}: text reports differ between runs");
        assert_eq!(json1, json2, "{name}: JSON reports differ between runs");
    }
    pass(
        10,
        "analyze reports byte-identical across repeated runs",
        start,
        None,
    );
}
