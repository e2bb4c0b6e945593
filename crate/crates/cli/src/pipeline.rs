//! Drive the analysis stages for one problem file and collect the results
//! into a [`Report`] plus an exit code.

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::BigRational;

use presymp_core::canonical::{
    find_valence, kernel_invariance_check, reduced_ranks, standard_symplectic, valence_check,
    CanonicalError, RankReport, TransformationPair, Valence,
};
use presymp_core::constraints::dirac::dirac_run;
use presymp_core::constraints::lagrangian::{
    lagrangian_pca, projectability_report, sode_run, SodeRun,
};
use presymp_core::constraints::{
    ChainError, ConstraintChain, Klass, MultiplierValue, Side, WeakOutcome,
};
use presymp_core::evolution::{build_k, generation_shift_check, verify_k};
use presymp_core::expr::{parse, RationalExpr, VarTable};
use presymp_core::legendre::{legendre, LegendreData, LegendreError};
use presymp_core::linalg::RfMatrix;
use presymp_core::mechanics::{build_system, LagrangianSystem};
use presymp_core::presymplectic::{pca_run, PcaResult, PresymplecticSystem};
use presymp_core::EngineSettings;

use crate::problem::{
    parse_problem_file, ProblemFile, ProblemSection, TransformationSection,
};
use crate::report::{
    CanonicalSection, ChainSection, ConstraintOut, EngineEcho, EnergySection, EvolutionSection,
    FiberSection, KernelInvarianceOut, MultiplierOut, NamedExpr, PresymplecticOut,
    ProjectabilityOut, RankOut, Report, SecondOrderSection, ShiftOut, SystemSection,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Analyze,
    Hamiltonian,
    Lagrangian,
    KCheck,
    CanonicalCheck,
    Validate,
}

impl CommandKind {
    pub fn label(self) -> &'static str {
        match self {
            CommandKind::Analyze => "analyze",
            CommandKind::Hamiltonian => "hamiltonian",
            CommandKind::Lagrangian => "lagrangian",
            CommandKind::KCheck => "k-check",
            CommandKind::CanonicalCheck => "canonical-check",
            CommandKind::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_generations: Option<u32>,
    pub trials: Option<u32>,
}

/// Everything the front end needs to emit for one file.
#[derive(Debug)]
pub struct RunOutput {
    /// Rendered text report; absent on input errors.
    pub text: Option<String>,
    /// JSON value for this file (a report, or an error object).
    pub json: serde_json::Value,
    /// Error diagnostics for standard error.
    pub errors: Vec<String>,
    /// Warning diagnostics for standard error (also inside the report).
    pub warnings: Vec<String>,
    pub code: u8,
}

/// Exit codes: 0 success, 2 input error, 3 inconsistent dynamics,
/// 4 indeterminate result.
const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 2;
const EXIT_INCONSISTENT: u8 = 3;
const EXIT_INDETERMINATE: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Verdict {
    Ok,
    Indeterminate,
    Inconsistent,
}

impl Verdict {
    fn escalate(&mut self, to: Verdict) {
        if to > *self {
            *self = to;
        }
    }

    fn code(self) -> u8 {
        match self {
            Verdict::Ok => EXIT_OK,
            Verdict::Indeterminate => EXIT_INDETERMINATE,
            Verdict::Inconsistent => EXIT_INCONSISTENT,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Verdict::Ok => "ok",
            Verdict::Indeterminate => "indeterminate",
            Verdict::Inconsistent => "inconsistent",
        }
    }
}

/// Fatal, report-less failure. Usually an input error (exit 2); carries its
/// own exit code for the rare undecidable-construction case (exit 4).
struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            message: message.into(),
            code: EXIT_INPUT,
        }
    }
}

type Stage<T> = Result<T, Failure>;

fn failure_output(path: &Path, f: &Failure) -> RunOutput {
    RunOutput {
        text: None,
        json: serde_json::json!({
            "file": path.display().to_string(),
            "error": f.message,
        }),
        errors: vec![format!("{}: {}", path.display(), f.message)],
        warnings: Vec::new(),
        code: f.code,
    }
}

pub fn run_file(kind: CommandKind, path: &Path, overrides: &Overrides) -> RunOutput {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return failure_output(path, &Failure::input(format!("cannot read file: {e}"))),
    };
    let file = match parse_problem_file(&text) {
        Ok(f) => f,
        Err(e) => return failure_output(path, &Failure::input(e.to_string())),
    };

    let mut settings = EngineSettings::default();
    if let Some(v) = file.engine.max_generations {
        settings.max_generations = v;
    }
    if let Some(v) = file.engine.trials {
        settings.trials = v;
    }
    if let Some(v) = file.engine.seed {
        settings.seed = v;
    }
    if let Some(v) = overrides.max_generations {
        settings.max_generations = v;
    }
    if let Some(v) = overrides.trials {
        settings.trials = v;
    }
    if let Some(v) = overrides.seed {
        settings.seed = v;
    }

    let echo = EngineEcho {
        seed: settings.seed,
        max_generations: settings.max_generations,
        trials: settings.trials,
    };
    let mut report = Report::new(kind.label(), &path.display().to_string(), echo);
    let mut verdict = Verdict::Ok;

    let built = if file.presymplectic.is_some() {
        run_presymplectic(kind, &file, &settings, &mut report, &mut verdict)
    } else {
        run_problem(kind, &file, &settings, &mut report, &mut verdict)
    };
    if let Err(f) = built {
        return failure_output(path, &f);
    }

    report.verdict = if kind == CommandKind::Validate && verdict == Verdict::Ok {
        "valid".to_owned()
    } else {
        verdict.label().to_owned()
    };
    let code = verdict.code();
    let mut errors = Vec::new();
    if verdict != Verdict::Ok {
        errors.push(format!("{}: verdict {}", path.display(), verdict.label()));
    }
    RunOutput {
        json: serde_json::to_value(&report).expect("report serializes"),
        warnings: report.warnings.clone(),
        text: Some(crate::report::render_text(&report)),
        errors,
        code,
    }
}

fn run_presymplectic(
    kind: CommandKind,
    file: &ProblemFile,
    settings: &EngineSettings,
    report: &mut Report,
    verdict: &mut Verdict,
) -> Stage<()> {
    let section = file.presymplectic.as_ref().expect("checked by caller");
    if !matches!(kind, CommandKind::Analyze | CommandKind::Validate) {
        return Err(Failure::input(format!(
            "the '{}' command requires a [problem] section, but the file is presymplectic",
            kind.label()
        )));
    }
    let names: Vec<&str> = section.vars.iter().map(String::as_str).collect();
    let t = VarTable::chart(&names).map_err(|e| Failure::input(e.to_string()))?;
    let m = names.len();
    let parse_at = |src: &str, what: &str| -> Stage<RationalExpr> {
        parse(src, &t).map_err(|e| Failure::input(format!("{what}: {e}")))
    };
    let mut rows = Vec::with_capacity(section.omega.len());
    for (i, row) in section.omega.iter().enumerate() {
        if row.len() != m {
            return Err(Failure::input(format!(
                "omega row {} has {} entries, expected {}",
                i + 1,
                row.len(),
                m
            )));
        }
        let mut out = Vec::with_capacity(m);
        for (j, src) in row.iter().enumerate() {
            out.push(parse_at(src, &format!("omega entry ({}, {})", i + 1, j + 1))?);
        }
        rows.push(out);
    }
    if rows.len() != m {
        return Err(Failure::input(format!(
            "omega has {} rows, expected {}",
            rows.len(),
            m
        )));
    }
    let omega = RfMatrix::from_rows(&t, rows);
    if section.alpha.len() != m {
        return Err(Failure::input(format!(
            "alpha has {} components, expected {}",
            section.alpha.len(),
            m
        )));
    }
    let mut alpha = Vec::with_capacity(m);
    for (i, src) in section.alpha.iter().enumerate() {
        alpha.push(parse_at(src, &format!("alpha component {}", i + 1))?);
    }
    let sys = PresymplecticSystem::new(&t, (0..m).collect(), omega, alpha)
        .map_err(|e| Failure::input(e.to_string()))?;

    if kind == CommandKind::Validate {
        return Ok(());
    }

    match pca_run(&sys, settings, Side::Presymplectic, 1, "chi") {
        Ok(result) => {
            let chain = chain_section(&result.chain, false);
            if !result.chain.stabilized {
                verdict.escalate(Verdict::Indeterminate);
            }
            report.presymplectic = Some(PresymplecticOut {
                variables: section.vars.clone(),
                particular: named_components(&t, &sys.chart, &result.particular, "X"),
                kernel: vector_strings(&result.kernel),
                chain,
            });
        }
        Err(ChainError::Inconsistent { constant }) => {
            verdict.escalate(Verdict::Inconsistent);
            report.warnings.push(format!(
                "presymplectic stabilization produced the nonzero constant {constant}"
            ));
        }
        Err(e) => return Err(Failure::input(e.to_string())),
    }
    Ok(())
}

fn run_problem(
    kind: CommandKind,
    file: &ProblemFile,
    settings: &EngineSettings,
    report: &mut Report,
    verdict: &mut Verdict,
) -> Stage<()> {
    let problem = file.problem.as_ref().expect("checked by parser");

    if kind == CommandKind::CanonicalCheck {
        let Some(tr) = &file.transformation else {
            return Err(Failure::input(
                "the 'canonical-check' command requires a [transformation] section",
            ));
        };
        let section = canonical_section(problem, tr, settings, report, verdict)?;
        report.canonical = Some(section);
        return Ok(());
    }

    let params: Vec<&str> = problem.params.iter().map(String::as_str).collect();
    let t = VarTable::for_lagrangian(problem.dim, &params)
        .map_err(|e| Failure::input(e.to_string()))?;
    let lag = parse(&problem.lagrangian, &t)
        .map_err(|e| Failure::input(format!("lagrangian: {e}")))?;
    let sys = build_system(&t, &lag).map_err(|e| Failure::input(e.to_string()))?;

    report.system = Some(system_section(&sys, problem));

    if kind == CommandKind::Validate {
        // Parse and build every block that is present, without analysis.
        if let Some(tr) = &file.transformation {
            let _ = canonical_pair(problem, tr, settings)?;
        }
        return Ok(());
    }

    let ld = match legendre(&sys, settings) {
        Ok(ld) => ld,
        Err(e @ LegendreError::IllDefinedHamiltonian { .. }) => {
            return Err(Failure::input(format!(
                "the Lagrangian is outside the supported almost-regular class: {e}"
            )));
        }
        Err(e) => return Err(Failure::input(e.to_string())),
    };
    report.fiber_derivative = Some(fiber_section(&ld));

    let ham = match dirac_run(&ld, settings) {
        Ok(c) => c,
        Err(ChainError::Inconsistent { constant }) => {
            verdict.escalate(Verdict::Inconsistent);
            report.warnings.push(format!(
                "canonical stabilization produced the nonzero constant {constant}"
            ));
            return Ok(());
        }
        Err(e) => return Err(Failure::input(e.to_string())),
    };
    chain_verdict(&ham, true, verdict);
    report.hamiltonian_chain = Some(chain_section(&ham, true));

    if kind == CommandKind::Hamiltonian {
        return Ok(());
    }

    let sode = match sode_run(&sys, settings) {
        Ok(s) => s,
        Err(ChainError::Inconsistent { constant }) => {
            verdict.escalate(Verdict::Inconsistent);
            report.warnings.push(format!(
                "second-order stabilization produced the nonzero constant {constant}"
            ));
            return Ok(());
        }
        Err(e) => return Err(Failure::input(e.to_string())),
    };
    chain_verdict(&sode.chain, false, verdict);
    report.second_order_chain = Some(second_order_section(&sode));

    if matches!(kind, CommandKind::Lagrangian | CommandKind::Analyze) {
        let pca = match lagrangian_pca(&sys, settings) {
            Ok(p) => p,
            Err(ChainError::Inconsistent { constant }) => {
                verdict.escalate(Verdict::Inconsistent);
                report.warnings.push(format!(
                    "energy-equation stabilization produced the nonzero constant {constant}"
                ));
                return Ok(());
            }
            Err(e) => return Err(Failure::input(e.to_string())),
        };
        chain_verdict(&pca.chain, false, verdict);
        report.energy_equation_chain = Some(energy_section(&sys, &pca));

        let rows = projectability_report(&sys, &sode.chain, &ham, &ld)
            .map_err(|e| Failure::input(e.to_string()))?;
        report.projectability = Some(
            rows.into_iter()
                .map(|r| ProjectabilityOut {
                    name: r.name.clone(),
                    generation: r.generation,
                    origin: r.origin.label().to_owned(),
                    matched: r.matched(),
                    combination: r.combination.as_ref().map(|parts| {
                        parts
                            .iter()
                            .map(|(name, coeff)| NamedExpr::new(name.clone(), coeff))
                            .collect()
                    }),
                })
                .collect(),
        );
    }

    if matches!(kind, CommandKind::KCheck | CommandKind::Analyze) {
        let k = build_k(&sys);
        let kr = verify_k(&sys, &ld, &k).map_err(|e| Failure::input(e.to_string()))?;
        report.evolution = Some(EvolutionSection {
            qdot: named_momentum_pairs(&sys, &k.qdot, |a| {
                sys.table.name(sys.table.position(a)).to_owned()
            }),
            pdot: named_momentum_pairs(&sys, &k.pdot, |a| format!("p{}", a + 1)),
            structural_residuals: expr_strings(&kr.structural),
            dynamical_q_residuals: expr_strings(&kr.dynamical_q),
            dynamical_v_residuals: expr_strings(&kr.dynamical_v),
            second_order_residuals: expr_strings(&kr.sode),
            verified: kr.ok(),
        });

        let shifts = generation_shift_check(&sys, &k, &ld, &ham, &sode.chain, settings)
            .map_err(|e| Failure::input(e.to_string()))?;
        let rows: Vec<ShiftOut> = shifts
            .iter()
            .map(|s| {
                let outcome = match &s.outcome {
                    WeakOutcome::Holds => "holds",
                    WeakOutcome::Fails { .. } => "fails",
                    WeakOutcome::Indeterminate { .. } => {
                        verdict.escalate(Verdict::Indeterminate);
                        "indeterminate"
                    }
                };
                ShiftOut {
                    name: s.name.clone(),
                    generation: s.ham_generation,
                    class: s.klass.label().to_owned(),
                    image: s.image.to_string(),
                    tested_through_generation: s.tested_generations,
                    outcome: outcome.to_owned(),
                    image_projectable: s.image_projectable,
                }
            })
            .collect();
        report.generation_shift = Some(rows);
    }

    if kind == CommandKind::Analyze {
        if let Some(tr) = &file.transformation {
            let section = canonical_section(problem, tr, settings, report, verdict)?;
            report.canonical = Some(section);
        }
    }

    Ok(())
}

fn chain_verdict(chain: &ConstraintChain, classify: bool, verdict: &mut Verdict) {
    if !chain.stabilized {
        verdict.escalate(Verdict::Indeterminate);
    }
    if classify && chain.all().any(|c| c.klass == Klass::Unknown) {
        verdict.escalate(Verdict::Indeterminate);
    }
}

fn expr_strings(v: &[RationalExpr]) -> Vec<String> {
    v.iter().map(RationalExpr::to_string).collect()
}

fn vector_strings(vs: &[Vec<RationalExpr>]) -> Vec<Vec<String>> {
    vs.iter().map(|v| expr_strings(v)).collect()
}

fn named_components(
    table: &Arc<VarTable>,
    chart: &[usize],
    values: &[RationalExpr],
    label: &str,
) -> Vec<NamedExpr> {
    chart
        .iter()
        .zip(values)
        .map(|(&i, v)| NamedExpr::new(format!("{label}[{}]", table.name(i)), v))
        .collect()
}

fn named_momentum_pairs(
    sys: &LagrangianSystem,
    values: &[RationalExpr],
    mut name: impl FnMut(usize) -> String,
) -> Vec<NamedExpr> {
    (0..sys.n).map(|a| NamedExpr::new(name(a), &values[a])).collect()
}

fn system_section(sys: &LagrangianSystem, problem: &ProblemSection) -> SystemSection {
    let t = &sys.table;
    SystemSection {
        dimension: sys.n,
        coordinates: (0..sys.n).map(|a| t.name(t.position(a)).to_owned()).collect(),
        velocities: (0..sys.n).map(|a| t.name(t.velocity(a)).to_owned()).collect(),
        parameters: problem.params.clone(),
        lagrangian: sys.lagrangian.to_string(),
        energy: sys.energy.to_string(),
        hessian_rank: sys.rank_w,
        two_form_rank: sys.rank_omega_l,
        kernel_dimension: sys.n - sys.rank_w,
    }
}

fn fiber_section(ld: &LegendreData) -> FiberSection {
    let n = ld.table.dim();
    FiberSection {
        momenta: (0..n)
            .map(|a| NamedExpr::new(format!("p{}", a + 1), &ld.momentum_exprs[a]))
            .collect(),
        primary_constraints: ld
            .primary_constraints
            .iter()
            .enumerate()
            .map(|(i, c)| NamedExpr::new(format!("phi{}", i + 1), c))
            .collect(),
        canonical_hamiltonian: ld.h0.to_string(),
    }
}

fn chain_section(chain: &ConstraintChain, with_class: bool) -> ChainSection {
    ChainSection {
        side: chain.side.label().to_owned(),
        stabilized: chain.stabilized,
        constraints: chain
            .all()
            .map(|c| ConstraintOut {
                name: c.name.clone(),
                expr: c.expr.to_string(),
                generation: c.generation,
                origin: c.origin.label().to_owned(),
                class: with_class.then(|| c.klass.label().to_owned()),
            })
            .collect(),
        multipliers: chain
            .multipliers
            .iter()
            .map(|m| MultiplierOut {
                name: m.name.clone(),
                value: match &m.value {
                    MultiplierValue::Free => "free".to_owned(),
                    MultiplierValue::Fixed(e) => e.to_string(),
                },
            })
            .collect(),
    }
}

fn second_order_section(sode: &SodeRun) -> SecondOrderSection {
    SecondOrderSection {
        chain: chain_section(&sode.chain, false),
        acceleration: sode
            .acceleration
            .iter()
            .enumerate()
            .map(|(a, v)| NamedExpr::new(format!("b{}", a + 1), v))
            .collect(),
        kernel: vector_strings(&sode.kernel),
    }
}

fn energy_section(sys: &LagrangianSystem, pca: &PcaResult) -> EnergySection {
    let t = &sys.table;
    let chart: Vec<usize> = (0..sys.n)
        .map(|a| t.position(a))
        .chain((0..sys.n).map(|a| t.velocity(a)))
        .collect();
    EnergySection {
        chain: chain_section(&pca.chain, false),
        particular: named_components(t, &chart, &pca.particular, "X"),
        kernel: vector_strings(&pca.kernel),
    }
}

/// Build the transformation pair from the file data. The chart is the
/// problem's momentum phase space `q1..qn, p1..pn` (plus any declared
/// parameters as inert extra variables).
fn canonical_pair(
    problem: &ProblemSection,
    tr: &TransformationSection,
    settings: &EngineSettings,
) -> Stage<(TransformationPair, usize)> {
    let n = problem.dim;
    let mut names: Vec<String> = (1..=n).map(|a| format!("q{a}")).collect();
    names.extend((1..=n).map(|a| format!("p{a}")));
    names.extend(problem.params.iter().cloned());
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let t = VarTable::chart(&name_refs).map_err(|e| Failure::input(e.to_string()))?;
    let m = 2 * n;

    if tr.map.len() != m {
        return Err(Failure::input(format!(
            "transformation map has {} components, expected {}",
            tr.map.len(),
            m
        )));
    }
    let parse_at = |src: &str, what: &str| -> Stage<RationalExpr> {
        parse(src, &t).map_err(|e| Failure::input(format!("{what}: {e}")))
    };
    let mut map = Vec::with_capacity(m);
    for (i, src) in tr.map.iter().enumerate() {
        map.push(parse_at(src, &format!("map component {}", i + 1))?);
    }
    let mut constraints1 = Vec::with_capacity(tr.constraints.len());
    for (i, src) in tr.constraints.iter().enumerate() {
        constraints1.push(parse_at(src, &format!("constraint {}", i + 1))?);
    }
    let constraints2 = match &tr.constraints2 {
        None => constraints1.clone(),
        Some(list) => {
            let mut out = Vec::with_capacity(list.len());
            for (i, src) in list.iter().enumerate() {
                out.push(parse_at(src, &format!("target constraint {}", i + 1))?);
            }
            out
        }
    };
    let omega1 = standard_symplectic(&t, n);
    let omega2 = match &tr.omega2 {
        None => standard_symplectic(&t, n),
        Some(rows) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(Failure::input(format!(
                    "omega2 must be a {m}x{m} matrix"
                )));
            }
            let mut out = Vec::with_capacity(m);
            for (i, row) in rows.iter().enumerate() {
                let mut r = Vec::with_capacity(m);
                for (j, src) in row.iter().enumerate() {
                    r.push(parse_at(src, &format!("omega2 entry ({}, {})", i + 1, j + 1))?);
                }
                out.push(r);
            }
            RfMatrix::from_rows(&t, out)
        }
    };

    let pair = TransformationPair::new(
        &t,
        (0..m).collect(),
        map,
        omega1,
        omega2,
        constraints1,
        constraints2,
        settings,
    )
    .map_err(|e| match e {
        CanonicalError::IncompatibleConstraints {
            indeterminate: true,
            ..
        } => Failure {
            message: format!("{e}; rerun with more trials or simpler constraints"),
            code: EXIT_INDETERMINATE,
        },
        other => Failure::input(other.to_string()),
    })?;
    Ok((pair, n))
}

fn rank_out(r: &RankReport) -> RankOut {
    RankOut {
        dim_ambient: r.dim_ambient,
        dim_surface: r.dim_c,
        rank_restricted_form: r.rank_omega_c,
        dim_kernel: r.dim_ker,
        dim_reduced: r.dim_reduced,
        numeric_consistent: r.numeric_consistent,
    }
}

fn canonical_section(
    problem: &ProblemSection,
    tr: &TransformationSection,
    settings: &EngineSettings,
    report: &mut Report,
    verdict: &mut Verdict,
) -> Stage<CanonicalSection> {
    let (pair, _) = canonical_pair(problem, tr, settings)?;
    let t = &pair.table;

    let map = pair
        .chart
        .iter()
        .zip(&pair.map)
        .map(|(&i, e)| NamedExpr::new(t.name(i), e))
        .collect();

    let found = find_valence(&pair, settings).map_err(|e| Failure::input(e.to_string()))?;
    let (valence, valence_verified) = match &found {
        Valence::Any => ("any".to_owned(), None),
        Valence::NoneFound => ("none".to_owned(), None),
        Valence::Constant(c) => {
            let check = valence_check(&pair, c, settings)
                .map_err(|e| Failure::input(e.to_string()))?;
            if check.indeterminate {
                verdict.escalate(Verdict::Indeterminate);
            }
            (c.to_string(), Some(check.ok))
        }
    };

    let (declared_valence, declared_valence_ok) = match &tr.valence {
        None => (None, None),
        Some(src) => {
            let c = BigRational::from_str(src).map_err(|_| {
                Failure::input(format!("valence must be an exact rational, got '{src}'"))
            })?;
            let check = valence_check(&pair, &c, settings)
                .map_err(|e| Failure::input(e.to_string()))?;
            if check.indeterminate {
                verdict.escalate(Verdict::Indeterminate);
            }
            (Some(c.to_string()), Some(check.ok))
        }
    };

    let source = reduced_ranks(t, &pair.chart, &pair.constraints1, &pair.omega1, settings)
        .map_err(|e| Failure::input(e.to_string()))?;
    let target = reduced_ranks(t, &pair.chart, &pair.constraints2, &pair.omega2, settings)
        .map_err(|e| Failure::input(e.to_string()))?;
    for (label, r) in [("source", &source), ("target", &target)] {
        if r.numeric_consistent == Some(false) {
            report.warnings.push(format!(
                "{label} surface: symbolic restricted-form rank {} disagrees with the \
                 sampled numeric rank",
                r.rank_omega_c
            ));
        }
    }

    let ki = kernel_invariance_check(&pair, settings).map_err(|e| Failure::input(e.to_string()))?;

    Ok(CanonicalSection {
        map,
        source_constraints: expr_strings(&pair.constraints1),
        target_constraints: expr_strings(&pair.constraints2),
        valence,
        valence_verified,
        declared_valence,
        declared_valence_ok,
        source_ranks: rank_out(&source),
        target_ranks: rank_out(&target),
        kernel_invariance: KernelInvarianceOut {
            kernel_dim: ki.kernel_dim,
            samples_checked: ki.samples_checked,
            ok: ki.ok,
        },
    })
}
