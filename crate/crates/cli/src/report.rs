//! Report model shared by the text and JSON outputs. The JSON document is
//! this structure serialized field for field; the text rendering prints the
//! same data in a fixed order so identical inputs give identical bytes.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Serialize, Debug, Clone)]
pub struct EngineEcho {
    pub seed: u64,
    pub max_generations: u32,
    pub trials: u32,
}

#[derive(Serialize, Debug, Clone)]
pub struct NamedExpr {
    pub name: String,
    pub expr: String,
}

impl NamedExpr {
    pub fn new(name: impl Into<String>, expr: impl ToString) -> Self {
        NamedExpr {
            name: name.into(),
            expr: expr.to_string(),
        }
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct SystemSection {
    pub dimension: usize,
    pub coordinates: Vec<String>,
    pub velocities: Vec<String>,
    pub parameters: Vec<String>,
    pub lagrangian: String,
    pub energy: String,
    pub hessian_rank: usize,
    pub two_form_rank: usize,
    pub kernel_dimension: usize,
}

#[derive(Serialize, Debug, Clone)]
pub struct FiberSection {
    pub momenta: Vec<NamedExpr>,
    pub primary_constraints: Vec<NamedExpr>,
    pub canonical_hamiltonian: String,
}

#[derive(Serialize, Debug, Clone)]
pub struct ConstraintOut {
    pub name: String,
    pub expr: String,
    pub generation: u32,
    pub origin: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
}

#[derive(Serialize, Debug, Clone)]
pub struct MultiplierOut {
    pub name: String,
    /// `"free"` or the fixed value in canonical expression syntax.
    pub value: String,
}

#[derive(Serialize, Debug, Clone)]
pub struct ChainSection {
    pub side: String,
    pub stabilized: bool,
    pub constraints: Vec<ConstraintOut>,
    pub multipliers: Vec<MultiplierOut>,
}

#[derive(Serialize, Debug, Clone)]
pub struct SecondOrderSection {
    #[serde(flatten)]
    pub chain: ChainSection,
    /// Base acceleration `b` with `W b = alpha`; the full second-order field
    /// is `(v, b + mu^h gamma_h)`.
    pub acceleration: Vec<NamedExpr>,
    /// Hessian kernel directions `gamma_h`, one per multiplier.
    pub kernel: Vec<Vec<String>>,
}

#[derive(Serialize, Debug, Clone)]
pub struct EnergySection {
    #[serde(flatten)]
    pub chain: ChainSection,
    /// A particular solution of the energy equation on the chart.
    pub particular: Vec<NamedExpr>,
    /// Kernel of the Lagrangian two-form: the gauge directions.
    pub kernel: Vec<Vec<String>>,
}

#[derive(Serialize, Debug, Clone)]
pub struct ProjectabilityOut {
    pub name: String,
    pub generation: u32,
    pub origin: String,
    pub matched: bool,
    /// Canonical-constraint combination with base coefficients, when one
    /// exists: the row equals `sum coeff * (constraint o FL)` modulo earlier
    /// velocity-space constraints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combination: Option<Vec<NamedExpr>>,
}

#[derive(Serialize, Debug, Clone)]
pub struct EvolutionSection {
    pub qdot: Vec<NamedExpr>,
    pub pdot: Vec<NamedExpr>,
    pub structural_residuals: Vec<String>,
    pub dynamical_q_residuals: Vec<String>,
    pub dynamical_v_residuals: Vec<String>,
    pub second_order_residuals: Vec<String>,
    pub verified: bool,
}

#[derive(Serialize, Debug, Clone)]
pub struct ShiftOut {
    pub name: String,
    pub generation: u32,
    pub class: String,
    pub image: String,
    pub tested_through_generation: u32,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_projectable: Option<bool>,
}

#[derive(Serialize, Debug, Clone)]
pub struct RankOut {
    pub dim_ambient: usize,
    pub dim_surface: usize,
    pub rank_restricted_form: usize,
    pub dim_kernel: usize,
    pub dim_reduced: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_consistent: Option<bool>,
}

#[derive(Serialize, Debug, Clone)]
pub struct KernelInvarianceOut {
    pub kernel_dim: usize,
    pub samples_checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
}

#[derive(Serialize, Debug, Clone)]
pub struct CanonicalSection {
    pub map: Vec<NamedExpr>,
    pub source_constraints: Vec<String>,
    pub target_constraints: Vec<String>,
    /// `"any"`, `"none"`, or an exact rational.
    pub valence: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valence_verified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_valence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_valence_ok: Option<bool>,
    pub source_ranks: RankOut,
    pub target_ranks: RankOut,
    pub kernel_invariance: KernelInvarianceOut,
}

#[derive(Serialize, Debug, Clone)]
pub struct PresymplecticOut {
    pub variables: Vec<String>,
    pub chain: ChainSection,
    pub particular: Vec<NamedExpr>,
    pub kernel: Vec<Vec<String>>,
}

/// Fixed sentence stating the generation-numbering convention; included in
/// every report so chain tables are self-describing.
pub const GENERATION_NUMBERING: &str = "canonical primary constraints are generation 1; \
     velocity-space chains start at generation 2, so time evolution maps \
     generation i to generation i+1";

#[derive(Serialize, Debug, Clone)]
pub struct Report {
    pub command: String,
    pub file: String,
    pub engine: EngineEcho,
    pub generation_numbering: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiber_derivative: Option<FiberSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamiltonian_chain: Option<ChainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_order_chain: Option<SecondOrderSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_equation_chain: Option<EnergySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projectability: Option<Vec<ProjectabilityOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation_shift: Option<Vec<ShiftOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub canonical: Option<CanonicalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub presymplectic: Option<PresymplecticOut>,
    pub warnings: Vec<String>,
    /// `"ok"`, `"valid"`, `"inconsistent"`, or `"indeterminate"`.
    pub verdict: String,
}

impl Report {
    pub fn new(command: &str, file: &str, engine: EngineEcho) -> Self {
        Report {
            command: command.to_owned(),
            file: file.to_owned(),
            engine,
            generation_numbering: GENERATION_NUMBERING.to_owned(),
            system: None,
            fiber_derivative: None,
            hamiltonian_chain: None,
            second_order_chain: None,
            energy_equation_chain: None,
            projectability: None,
            evolution: None,
            generation_shift: None,
            canonical: None,
            presymplectic: None,
            warnings: Vec::new(),
            verdict: "ok".to_owned(),
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn write_chain(out: &mut String, header: &str, c: &ChainSection) {
    let _ = writeln!(out, "[{header}]");
    let _ = writeln!(out, "side: {}", c.side);
    let _ = writeln!(out, "stabilized: {}", yes_no(c.stabilized));
    if c.constraints.is_empty() {
        let _ = writeln!(out, "constraints: none");
    }
    for k in &c.constraints {
        let class = k
            .class
            .as_deref()
            .map(|s| format!(" {s}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{} = {}  @{} {}{}",
            k.name, k.expr, k.generation, k.origin, class
        );
    }
    for m in &c.multipliers {
        let _ = writeln!(out, "{} = {}", m.name, m.value);
    }
}

fn write_vectors(out: &mut String, label: &str, vs: &[Vec<String>]) {
    for (i, v) in vs.iter().enumerate() {
        let _ = writeln!(out, "{}{}: ({})", label, i + 1, v.join(", "));
    }
}

fn write_rank(out: &mut String, label: &str, r: &RankOut) {
    let _ = write!(
        out,
        "{label}: ambient {} / surface {} / restricted-form rank {} / kernel {} / reduced {}",
        r.dim_ambient, r.dim_surface, r.rank_restricted_form, r.dim_kernel, r.dim_reduced
    );
    match r.numeric_consistent {
        Some(b) => {
            let _ = writeln!(out, " / numeric check {}", yes_no(b));
        }
        None => {
            let _ = writeln!(out);
        }
    }
}

/// Render the deterministic text report.
pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "command: {}", r.command);
    let _ = writeln!(out, "file: {}", r.file);
    let _ = writeln!(
        out,
        "engine: seed {} / max generations {} / trials {}",
        r.engine.seed, r.engine.max_generations, r.engine.trials
    );
    let _ = writeln!(out, "generation numbering: {}", r.generation_numbering);

    if let Some(s) = &r.system {
        let _ = writeln!(out, "\n[system]");
        let _ = writeln!(out, "dimension: {}", s.dimension);
        let _ = writeln!(out, "coordinates: {}", s.coordinates.join(", "));
        let _ = writeln!(out, "velocities: {}", s.velocities.join(", "));
        if !s.parameters.is_empty() {
            let _ = writeln!(out, "parameters: {}", s.parameters.join(", "));
        }
        let _ = writeln!(out, "lagrangian: {}", s.lagrangian);
        let _ = writeln!(out, "energy: {}", s.energy);
        let _ = writeln!(out, "hessian rank: {}", s.hessian_rank);
        let _ = writeln!(out, "two-form rank: {}", s.two_form_rank);
        let _ = writeln!(out, "kernel dimension: {}", s.kernel_dimension);
    }

    if let Some(fd) = &r.fiber_derivative {
        let _ = writeln!(out, "\n[fiber derivative]");
        for m in &fd.momenta {
            let _ = writeln!(out, "{} = {}", m.name, m.expr);
        }
        if fd.primary_constraints.is_empty() {
            let _ = writeln!(out, "primary constraints: none");
        }
        for p in &fd.primary_constraints {
            let _ = writeln!(out, "primary {} = {}", p.name, p.expr);
        }
        let _ = writeln!(out, "canonical hamiltonian: {}", fd.canonical_hamiltonian);
    }

    if let Some(c) = &r.hamiltonian_chain {
        let _ = writeln!(out);
        write_chain(&mut out, "hamiltonian chain", c);
    }

    if let Some(s) = &r.second_order_chain {
        let _ = writeln!(out);
        write_chain(&mut out, "second-order chain", &s.chain);
        for a in &s.acceleration {
            let _ = writeln!(out, "{} = {}", a.name, a.expr);
        }
        write_vectors(&mut out, "kernel direction ", &s.kernel);
    }

    if let Some(s) = &r.energy_equation_chain {
        let _ = writeln!(out);
        write_chain(&mut out, "energy-equation chain", &s.chain);
        for a in &s.particular {
            let _ = writeln!(out, "{} = {}", a.name, a.expr);
        }
        write_vectors(&mut out, "kernel direction ", &s.kernel);
    }

    if let Some(rows) = &r.projectability {
        let _ = writeln!(out, "\n[projectability]");
        if rows.is_empty() {
            let _ = writeln!(out, "no velocity-space constraints");
        }
        for row in rows {
            let tail = match &row.combination {
                Some(parts) => {
                    let sum = parts
                        .iter()
                        .map(|p| format!("({}) * {}", p.expr, p.name))
                        .collect::<Vec<_>>()
                        .join(" + ");
                    format!("matched: {sum}")
                }
                None => "unmatched".to_owned(),
            };
            let _ = writeln!(
                out,
                "{} @{} {}: {}",
                row.name, row.generation, row.origin, tail
            );
        }
    }

    if let Some(e) = &r.evolution {
        let _ = writeln!(out, "\n[time evolution]");
        for x in e.qdot.iter().chain(e.pdot.iter()) {
            let _ = writeln!(out, "K {} = {}", x.name, x.expr);
        }
        let _ = writeln!(out, "structural residuals: {}", e.structural_residuals.join(", "));
        let _ = writeln!(
            out,
            "dynamical residuals (base): {}",
            e.dynamical_q_residuals.join(", ")
        );
        let _ = writeln!(
            out,
            "dynamical residuals (fiber): {}",
            e.dynamical_v_residuals.join(", ")
        );
        let _ = writeln!(
            out,
            "second-order residuals: {}",
            e.second_order_residuals.join(", ")
        );
        let _ = writeln!(out, "verified: {}", yes_no(e.verified));
    }

    if let Some(rows) = &r.generation_shift {
        let _ = writeln!(out, "\n[generation shift]");
        if rows.is_empty() {
            let _ = writeln!(out, "no canonical constraints");
        }
        for s in rows {
            let proj = match s.image_projectable {
                Some(b) => format!(", image projectable: {}", yes_no(b)),
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "{} @{} {}: image = {} ~ 0 through generation {}: {}{}",
                s.name,
                s.generation,
                s.class,
                s.image,
                s.tested_through_generation,
                s.outcome,
                proj
            );
        }
    }

    if let Some(c) = &r.canonical {
        let _ = writeln!(out, "\n[canonical transformation]");
        for m in &c.map {
            let _ = writeln!(out, "{} -> {}", m.name, m.expr);
        }
        let _ = writeln!(
            out,
            "source constraints: {}",
            if c.source_constraints.is_empty() {
                "none".to_owned()
            } else {
                c.source_constraints.join(", ")
            }
        );
        let _ = writeln!(
            out,
            "target constraints: {}",
            if c.target_constraints.is_empty() {
                "none".to_owned()
            } else {
                c.target_constraints.join(", ")
            }
        );
        let _ = writeln!(out, "valence: {}", c.valence);
        if let Some(v) = c.valence_verified {
            let _ = writeln!(out, "valence verified: {}", yes_no(v));
        }
        if let Some(d) = &c.declared_valence {
            let _ = writeln!(out, "declared valence: {d}");
        }
        if let Some(ok) = c.declared_valence_ok {
            let _ = writeln!(out, "declared valence holds: {}", yes_no(ok));
        }
        write_rank(&mut out, "source ranks", &c.source_ranks);
        write_rank(&mut out, "target ranks", &c.target_ranks);
        let ki = &c.kernel_invariance;
        let ok = match ki.ok {
            Some(b) => yes_no(b).to_owned(),
            None => "not sampled".to_owned(),
        };
        let _ = writeln!(
            out,
            "kernel invariance: kernel dim {} / samples {} / ok {}",
            ki.kernel_dim, ki.samples_checked, ok
        );
    }

    if let Some(p) = &r.presymplectic {
        let _ = writeln!(out, "\n[presymplectic system]");
        let _ = writeln!(out, "variables: {}", p.variables.join(", "));
        write_chain(&mut out, "presymplectic chain", &p.chain);
        for a in &p.particular {
            let _ = writeln!(out, "{} = {}", a.name, a.expr);
        }
        write_vectors(&mut out, "kernel direction ", &p.kernel);
    }

    for w in &r.warnings {
        let _ = writeln!(out, "\nwarning: {w}");
    }

    let _ = writeln!(out, "\nverdict: {}", r.verdict);
    out
}
